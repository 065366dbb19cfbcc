#ifndef VCP_OPTIM_HPP
#define VCP_OPTIM_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

namespace vcp {

/// One-hidden-layer classifier: softmax(W2 * relu(W1*x + b1) + b2).
/// Parameters live in one flat vector so the optimizer can treat them as a
/// point: W1 stored feature-major (F*H, hidden index contiguous for
/// vectorization), then b1, then W2 row-major K*H, then b2.
struct MlpParams {
    int F = 0;    // input features
    int H = 500;  // hidden width
    int K = 2;    // classes
    std::vector<double> w;

    MlpParams() = default;
    MlpParams(int F_, int H_, int K_) : F(F_), H(H_), K(K_) {
        w.assign(param_count(F_, H_, K_), 0.0);
    }

    static std::size_t param_count(int F, int H, int K) {
        return static_cast<std::size_t>(H) * F + H + static_cast<std::size_t>(K) * H + K;
    }
    std::size_t w1_off() const { return 0; }
    std::size_t b1_off() const { return static_cast<std::size_t>(H) * F; }
    std::size_t w2_off() const { return b1_off() + H; }
    std::size_t b2_off() const { return w2_off() + static_cast<std::size_t>(K) * H; }
};

/// Seeded Glorot-uniform initialization (biases zero).
MlpParams init_mlp(int F, int H, int K, std::uint64_t seed);

struct TrainingBatch {
    int F = 0, K = 2;
    std::vector<double> X;        // N*F, row-major
    std::vector<std::uint8_t> T;  // N*K one-hot rows
    std::size_t rows() const { return F == 0 ? 0 : X.size() / F; }
};

/// Row-wise class probabilities, N*K. Numerically stable softmax.
std::vector<double> mlp_forward(const MlpParams& p, const std::vector<double>& X);

/// Summed (not averaged) cross entropy -sum_i sum_j t_ij ln y_ij, with
/// probabilities clamped at 1e-12 before the log.
double cross_entropy_loss(const std::vector<double>& probs,
                          const std::vector<std::uint8_t>& T, int K);

/// Loss plus exact gradient by backpropagation. Reductions run over
/// fixed-size pixel blocks merged in block order, so results are identical
/// for any thread count.
double mlp_loss_grad(const MlpParams& p, const TrainingBatch& batch,
                     std::vector<double>& grad);

struct LbfgsConfig {
    int history_m = 10;
    int max_iters = 200;
    double grad_tol = 1e-6;  // max-norm stopping threshold
    double armijo_c1 = 1e-4;
    double backtrack_factor = 0.5;
    int max_line_search = 30;
};

struct LbfgsResult {
    std::vector<double> x;
    std::vector<double> trace;  // objective value at x0 and each accepted iterate
    int iterations = 0;
    bool stalled = false;       // line search exhausted its trials
    bool converged = false;     // hit grad_tol
};

using Objective =
    std::function<double(const std::vector<double>&, std::vector<double>&)>;
// Called after each accepted iterate; return false to stop (used for
// validation-based early stopping). iter counts accepted iterations from 1.
using IterationCallback =
    std::function<bool(int iter, const std::vector<double>& x, double fval)>;

/// Two-loop-recursion LBFGS with backtracking Armijo line search. The value
/// trace is monotone non-increasing while the line search succeeds.
LbfgsResult lbfgs_minimize(const Objective& objective, std::vector<double> x0,
                           const LbfgsConfig& cfg,
                           const IterationCallback& on_iteration = nullptr);

// ---- parameter files ----------------------------------------------------
// Layout: one JSON header line, '\n', then the values as little-endian
// float64. The header carries dims, seed, and the feature schema version.

void save_params_file(const nlohmann::json& header, const std::vector<double>& values,
                      const std::string& path);
nlohmann::json load_params_file(const std::string& path, std::vector<double>& values);

void save_mlp(const MlpParams& p, std::uint64_t seed, const std::string& path);
MlpParams load_mlp(const std::string& path);

}  // namespace vcp

#endif
