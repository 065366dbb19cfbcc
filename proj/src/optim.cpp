#include "vcp/optim.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "vcp/parallel.hpp"
#include "vcp/rng.hpp"

using nlohmann::json;

namespace vcp {

namespace {
constexpr double kProbClamp = 1e-12;
constexpr std::size_t kPixelBlock = 4096;

bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

// forward pass for rows [lo,hi); probs may be null when only loss is needed
double forward_block(const MlpParams& p, const double* X, const std::uint8_t* T,
                     std::size_t lo, std::size_t hi, double* probs_out,
                     double* grad_out) {
    const int F = p.F, H = p.H, K = p.K;
    const double* W1 = p.w.data() + p.w1_off();
    const double* b1 = p.w.data() + p.b1_off();
    const double* W2 = p.w.data() + p.w2_off();
    const double* b2 = p.w.data() + p.b2_off();

    double* gW1 = nullptr;
    double* gb1 = nullptr;
    double* gW2 = nullptr;
    double* gb2 = nullptr;
    if (grad_out) {
        gW1 = grad_out + p.w1_off();
        gb1 = grad_out + p.b1_off();
        gW2 = grad_out + p.w2_off();
        gb2 = grad_out + p.b2_off();
    }

    std::vector<double> hidden(H), dh(H), logits(K), prob(K), dlogit(K);
    double loss = 0.0;

    for (std::size_t i = lo; i < hi; ++i) {
        const double* x = X + i * F;
        // W1 is feature-major: inner loops run contiguously over H
        for (int j = 0; j < H; ++j) hidden[j] = b1[j];
        for (int f = 0; f < F; ++f) {
            const double xf = x[f];
            const double* col = W1 + static_cast<std::size_t>(f) * H;
            for (int j = 0; j < H; ++j) hidden[j] += xf * col[j];
        }
        for (int j = 0; j < H; ++j) hidden[j] = hidden[j] > 0.0 ? hidden[j] : 0.0;

        double maxlogit = -1e300;
        for (int k = 0; k < K; ++k) {
            const double* w2k = W2 + static_cast<std::size_t>(k) * H;
            double a = b2[k];
            for (int j = 0; j < H; ++j) a += w2k[j] * hidden[j];
            logits[k] = a;
            maxlogit = std::max(maxlogit, a);
        }
        double denom = 0.0;
        for (int k = 0; k < K; ++k) {
            prob[k] = std::exp(logits[k] - maxlogit);
            denom += prob[k];
        }
        for (int k = 0; k < K; ++k) prob[k] /= denom;

        if (probs_out)
            for (int k = 0; k < K; ++k) probs_out[i * K + k] = prob[k];

        if (T) {
            for (int k = 0; k < K; ++k)
                if (T[i * K + k])
                    loss -= std::log(std::max(prob[k], kProbClamp));
        }

        if (grad_out) {
            for (int k = 0; k < K; ++k)
                dlogit[k] = prob[k] - static_cast<double>(T[i * K + k]);
            std::fill(dh.begin(), dh.end(), 0.0);
            for (int k = 0; k < K; ++k) {
                const double d = dlogit[k];
                double* gw2k = gW2 + static_cast<std::size_t>(k) * H;
                const double* w2k = W2 + static_cast<std::size_t>(k) * H;
                for (int j = 0; j < H; ++j) {
                    gw2k[j] += d * hidden[j];
                    dh[j] += d * w2k[j];
                }
                gb2[k] += d;
            }
            for (int j = 0; j < H; ++j) {  // relu gate
                if (hidden[j] <= 0.0) dh[j] = 0.0;
            }
            for (int f = 0; f < F; ++f) {
                const double xf = x[f];
                double* gcol = gW1 + static_cast<std::size_t>(f) * H;
                for (int j = 0; j < H; ++j) gcol[j] += xf * dh[j];
            }
            for (int j = 0; j < H; ++j) gb1[j] += dh[j];
        }
    }
    return loss;
}

}  // namespace

MlpParams init_mlp(int F, int H, int K, std::uint64_t seed) {
    if (F <= 0 || H <= 0 || K <= 0) throw std::runtime_error("init_mlp: bad dims");
    MlpParams p(F, H, K);
    Rng rng(seed);
    const double bound1 = std::sqrt(6.0 / (F + H));
    for (std::size_t i = p.w1_off(); i < p.b1_off(); ++i)
        p.w[i] = rng.uniform(-bound1, bound1);
    const double bound2 = std::sqrt(6.0 / (H + K));
    for (std::size_t i = p.w2_off(); i < p.b2_off(); ++i)
        p.w[i] = rng.uniform(-bound2, bound2);
    return p;
}

std::vector<double> mlp_forward(const MlpParams& p, const std::vector<double>& X) {
    if (p.F <= 0 || X.size() % p.F != 0)
        throw std::runtime_error("mlp_forward: feature count mismatch");
    if (!all_finite(X)) throw std::runtime_error("mlp_forward: non-finite input");
    const std::size_t n = X.size() / p.F;
    std::vector<double> probs(n * p.K);
    parallel_blocks(n, kPixelBlock, [&](std::size_t, std::size_t lo, std::size_t hi) {
        forward_block(p, X.data(), nullptr, lo, hi, probs.data(), nullptr);
    });
    return probs;
}

double cross_entropy_loss(const std::vector<double>& probs,
                          const std::vector<std::uint8_t>& T, int K) {
    if (K <= 0 || probs.size() != T.size() || probs.size() % K != 0)
        throw std::runtime_error("cross_entropy_loss: shape mismatch");
    const std::size_t n = probs.size() / K;
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (int k = 0; k < K; ++k)
            if (T[i * K + k])
                loss -= std::log(std::max(probs[i * K + k], kProbClamp));
    return loss;
}

double mlp_loss_grad(const MlpParams& p, const TrainingBatch& batch,
                     std::vector<double>& grad) {
    if (batch.F != p.F || batch.K != p.K)
        throw std::runtime_error("mlp_loss_grad: batch shape mismatch");
    const std::size_t n = batch.rows();
    if (n == 0) throw std::runtime_error("mlp_loss_grad: empty batch");
    if (batch.T.size() != n * p.K)
        throw std::runtime_error("mlp_loss_grad: target shape mismatch");

    const std::size_t np = p.w.size();
    const std::size_t nblocks = block_count(n, kPixelBlock);
    std::vector<std::vector<double>> partial_grad(nblocks);
    std::vector<double> partial_loss(nblocks, 0.0);

    parallel_blocks(n, kPixelBlock, [&](std::size_t b, std::size_t lo, std::size_t hi) {
        partial_grad[b].assign(np, 0.0);
        partial_loss[b] = forward_block(p, batch.X.data(), batch.T.data(), lo, hi,
                                        nullptr, partial_grad[b].data());
    });

    grad.assign(np, 0.0);
    double loss = 0.0;
    for (std::size_t b = 0; b < nblocks; ++b) {  // fixed merge order
        loss += partial_loss[b];
        const double* g = partial_grad[b].data();
        for (std::size_t i = 0; i < np; ++i) grad[i] += g[i];
    }
    if (!std::isfinite(loss) || !all_finite(grad))
        throw std::runtime_error("training failure: non-finite loss or gradient");
    return loss;
}

LbfgsResult lbfgsminimize_impl(const Objective& objective, std::vector<double> x0,
                               const LbfgsConfig& cfg,
                               const IterationCallback& on_iteration) {
    if (cfg.history_m < 1) throw std::runtime_error("lbfgs: history_m must be >= 1");
    if (!(cfg.grad_tol > 0)) throw std::runtime_error("lbfgs: grad_tol must be > 0");
    if (!all_finite(x0)) throw std::runtime_error("lbfgs: non-finite x0");

    const std::size_t n = x0.size();
    LbfgsResult res;
    res.x = std::move(x0);

    std::vector<double> g(n), x_new(n), g_new(n), d(n);
    double f = objective(res.x, g);
    if (!std::isfinite(f)) throw std::runtime_error("lbfgs: objective is NaN at x0");
    res.trace.push_back(f);

    auto max_norm = [](const std::vector<double>& v) {
        double m = 0;
        for (double a : v) m = std::max(m, std::fabs(a));
        return m;
    };

    if (max_norm(g) <= cfg.grad_tol) {
        res.converged = true;
        return res;
    }

    std::vector<std::vector<double>> S, Y;
    std::vector<double> rho;
    double gamma = 1.0;

    for (int iter = 0; iter < cfg.max_iters; ++iter) {
        // two-loop recursion: d = -H*g
        d = g;
        const int m = static_cast<int>(S.size());
        std::vector<double> alpha(m);
        for (int i = m - 1; i >= 0; --i) {
            double a = 0;
            for (std::size_t t = 0; t < n; ++t) a += S[i][t] * d[t];
            a *= rho[i];
            alpha[i] = a;
            for (std::size_t t = 0; t < n; ++t) d[t] -= a * Y[i][t];
        }
        for (std::size_t t = 0; t < n; ++t) d[t] *= gamma;
        for (int i = 0; i < m; ++i) {
            double beta = 0;
            for (std::size_t t = 0; t < n; ++t) beta += Y[i][t] * d[t];
            beta *= rho[i];
            for (std::size_t t = 0; t < n; ++t) d[t] += (alpha[i] - beta) * S[i][t];
        }
        for (std::size_t t = 0; t < n; ++t) d[t] = -d[t];

        double gd = 0;
        for (std::size_t t = 0; t < n; ++t) gd += g[t] * d[t];
        if (gd >= 0) {  // not a descent direction; fall back to steepest descent
            for (std::size_t t = 0; t < n; ++t) d[t] = -g[t];
            gd = 0;
            for (std::size_t t = 0; t < n; ++t) gd += g[t] * d[t];
        }

        double step = 1.0;
        if (m == 0) step = 1.0 / std::max(1.0, max_norm(g));

        bool accepted = false;
        double f_new = f;
        for (int ls = 0; ls < cfg.max_line_search; ++ls) {
            for (std::size_t t = 0; t < n; ++t) x_new[t] = res.x[t] + step * d[t];
            f_new = objective(x_new, g_new);
            if (std::isfinite(f_new) && f_new <= f + cfg.armijo_c1 * step * gd) {
                accepted = true;
                break;
            }
            step *= cfg.backtrack_factor;
        }
        if (!accepted) {
            res.stalled = true;  // best iterate so far is res.x
            return res;
        }

        // curvature pair
        std::vector<double> s(n), y(n);
        double sy = 0, yy = 0;
        for (std::size_t t = 0; t < n; ++t) {
            s[t] = x_new[t] - res.x[t];
            y[t] = g_new[t] - g[t];
            sy += s[t] * y[t];
            yy += y[t] * y[t];
        }
        res.x.swap(x_new);
        g.swap(g_new);
        f = f_new;
        res.trace.push_back(f);
        ++res.iterations;

        if (sy > 1e-12 * std::sqrt(yy) * max_norm(s) && yy > 0) {
            if (static_cast<int>(S.size()) == cfg.history_m) {
                S.erase(S.begin());
                Y.erase(Y.begin());
                rho.erase(rho.begin());
            }
            S.push_back(std::move(s));
            Y.push_back(std::move(y));
            rho.push_back(1.0 / sy);
            gamma = sy / yy;
        }

        if (on_iteration && !on_iteration(res.iterations, res.x, f)) return res;

        if (max_norm(g) <= cfg.grad_tol) {
            res.converged = true;
            return res;
        }
    }
    return res;
}

LbfgsResult lbfgs_minimize(const Objective& objective, std::vector<double> x0,
                           const LbfgsConfig& cfg,
                           const IterationCallback& on_iteration) {
    return lbfgsminimize_impl(objective, std::move(x0), cfg, on_iteration);
}

void save_params_file(const json& header, const std::vector<double>& values,
                      const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << header.dump() << "\n";
    static_assert(sizeof(double) == 8);
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * 8));
    if (!out) throw std::runtime_error("short write on " + path);
}

json load_params_file(const std::string& path, std::vector<double>& values) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("missing header in " + path);
    json header;
    try {
        header = json::parse(line);
    } catch (const std::exception& e) {
        throw std::runtime_error("bad header in " + path + ": " + e.what());
    }
    std::vector<char> payload((std::istreambuf_iterator<char>(in)),
                              std::istreambuf_iterator<char>());
    if (payload.size() % 8 != 0)
        throw std::runtime_error("truncated payload in " + path);
    values.resize(payload.size() / 8);
    std::memcpy(values.data(), payload.data(), payload.size());
    return header;
}

void save_mlp(const MlpParams& p, std::uint64_t seed, const std::string& path) {
    json header;
    header["schema"] = "mlp-v1";
    header["feature_schema"] = 1;
    header["F"] = p.F;
    header["H"] = p.H;
    header["K"] = p.K;
    header["seed"] = seed;
    save_params_file(header, p.w, path);
}

MlpParams load_mlp(const std::string& path) {
    std::vector<double> values;
    const json header = load_params_file(path, values);
    if (header.value("schema", "") != "mlp-v1")
        throw std::runtime_error("not an mlp parameter file: " + path);
    MlpParams p(header["F"].get<int>(), header["H"].get<int>(), header["K"].get<int>());
    if (values.size() != p.w.size())
        throw std::runtime_error("parameter count mismatch in " + path);
    p.w = std::move(values);
    return p;
}

}  // namespace vcp
