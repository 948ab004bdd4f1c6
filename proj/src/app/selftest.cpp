#include "protofs/app/selftest.hpp"

#include <chrono>
#include <cmath>
#include <map>

#include "protofs/core/rng.hpp"
#include "protofs/core/stats.hpp"
#include "protofs/diff/gradcheck.hpp"
#include "protofs/eval/metrics.hpp"
#include "protofs/net/backbone.hpp"
#include "protofs/proto/head.hpp"

namespace protofs::app {

namespace {

Tensor random_tensor(Shape shape, Rng& rng, bool requires_grad = true) {
    std::vector<double> v(shape_size(shape));
    for (auto& x : v) x = rng.normal();
    return Tensor(std::move(shape), std::move(v), requires_grad);
}

Tensor weighted_loss(Tape& tape, const Tensor& y, const Tensor& w) { return sum(tape, mul(tape, y, w)); }

void gradient_checks(std::size_t seeds, std::map<std::string, double>& worst) {
    auto note = [&](const std::string& name, double err) { worst[name] = std::max(worst[name], err); };
    for (std::uint64_t seed = 0; seed < seeds; ++seed) {
        Rng rng(seed, 0x636865636b);
        {
            std::vector<Tensor> p{random_tensor({4, 3}, rng), random_tensor({3, 5}, rng), random_tensor({5}, rng)};
            const std::vector<int> t{0, 4, 2, 1};
            note("linear+log_softmax+nll_loss", finite_diff_check(p, [&](Tape& tape) {
                return nll_loss(tape, log_softmax(tape, linear(tape, p[0], p[1], p[2])), t);
            }));
        }
        {
            std::vector<Tensor> p{random_tensor({3, 4}, rng), random_tensor({4, 2}, rng)};
            const auto w = random_tensor({3, 2}, rng, false);
            note("matmul+scale", finite_diff_check(p, [&](Tape& tape) {
                return weighted_loss(tape, scale(tape, matmul(tape, p[0], p[1]), -1.5), w);
            }));
        }
        {
            std::vector<Tensor> p{random_tensor({2, 2, 4, 5}, rng), random_tensor({3, 2, 3, 3}, rng),
                                  random_tensor({3}, rng)};
            const auto w = random_tensor({2, 3, 4, 5}, rng, false);
            note("conv2d_3x3", finite_diff_check(p, [&](Tape& tape) {
                return weighted_loss(tape, conv2d_3x3(tape, p[0], p[1], p[2]), w);
            }));
        }
        {
            std::vector<Tensor> p{random_tensor({3, 2, 2, 3}, rng), random_tensor({2}, rng), random_tensor({2}, rng)};
            const auto w = random_tensor({3, 2, 2, 3}, rng, false);
            note("batchnorm(train)", finite_diff_check(p, [&](Tape& tape) {
                auto stats = BatchNormStats::fresh(2);
                return weighted_loss(tape, batchnorm_train(tape, p[0], p[1], p[2], stats), w);
            }));
            const BatchNormStats running{{0.2, -0.1}, {1.5, 0.7}};
            note("batchnorm(eval)", finite_diff_check(p, [&](Tape& tape) {
                return weighted_loss(tape, batchnorm_eval(tape, p[0], p[1], p[2], running), w);
            }));
        }
        {
            std::vector<Tensor> p{random_tensor({3, 2, 5, 4}, rng)};
            const auto w = random_tensor({2, 8}, rng, false);
            note("relu+maxpool2+reshape+slice_rows", finite_diff_check(p, [&](Tape& tape) {
                auto flat = reshape(tape, maxpool2(tape, relu(tape, p[0])), {3, 8});
                return weighted_loss(tape, slice_rows(tape, flat, 1, 2), w);
            }));
        }
        {
            std::vector<Tensor> p{random_tensor({4, 3}, rng), random_tensor({2, 3}, rng)};
            const auto w = random_tensor({4, 2}, rng, false);
            note("sq_dist_matrix", finite_diff_check(p, [&](Tape& tape) {
                return weighted_loss(tape, sq_dist_matrix(tape, p[0], p[1]), w);
            }));
        }
        {
            auto net = net::build({net::BackboneKind::ConvNet4, {3, 8, 8}}, seed);
            const auto x = random_tensor({3, 3, 8, 8}, rng, false);
            // Small readout keeps loss roundoff under the error floor for the
            // exactly-zero last-block beta gradients.
            auto w = random_tensor({3, net.embed_dim()}, rng, false);
            for (auto& v : w.data()) v *= 1e-4;
            std::vector<Tensor> params;
            for (auto& p : net.parameters()) params.push_back(p.value);
            FiniteDiffOptions opts;
            opts.max_coords_per_tensor = 12;
            opts.seed = seed;
            note("ConvNet4 8x8", finite_diff_check(params, [&](Tape& tape) {
                return weighted_loss(tape, net.forward(tape, x, RunMode::Train), w);
            }, opts));
        }
    }
}

OracleEntry prototype_oracle() {
    Rng rng(5);
    double worst = 0.0;
    std::size_t mismatches = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t way = 2 + rng.uniform_below(6), shot = 1 + rng.uniform_below(5), d = 1 + rng.uniform_below(8);
        std::vector<int> labels;
        for (std::size_t k = 0; k < way; ++k)
            for (std::size_t s = 0; s < shot; ++s) labels.push_back(static_cast<int>(k));
        const auto emb = random_tensor({way * shot, d}, rng, false);
        const auto queries = random_tensor({7, d}, rng, false);
        Tape tape(Tape::Mode::NoGrad);
        const auto protos = proto::compute_prototypes(tape, emb, labels, way);
        std::vector<double> naive(way * d, 0.0);
        for (std::size_t i = 0; i < labels.size(); ++i)
            for (std::size_t j = 0; j < d; ++j) naive[static_cast<std::size_t>(labels[i]) * d + j] += emb[i * d + j] / shot;
        for (std::size_t i = 0; i < naive.size(); ++i) worst = std::max(worst, std::abs(naive[i] - protos.prototypes[i]));
        const auto out = proto::classify(tape, queries, protos);
        for (std::size_t q = 0; q < 7; ++q) {
            std::size_t best = 0;
            double best_d = 0.0;
            for (std::size_t k = 0; k < way; ++k) {
                double s = 0.0;
                for (std::size_t j = 0; j < d; ++j) s += std::pow(queries[q * d + j] - naive[k * d + j], 2);
                if (k == 0 || s < best_d) {
                    best = k;
                    best_d = s;
                }
            }
            mismatches += out.predictions[q] != static_cast<int>(best);
        }
    }
    return {"prototype mean and nearest-prototype argmin", worst <= 1e-12 && mismatches == 0,
            "max deviation " + std::to_string(worst) + ", mismatches " + std::to_string(mismatches)};
}

OracleEntry metric_oracle() {
    const std::vector<double> acc{0.8, 0.6, 0.7, 0.9, 0.5};
    const double ci_err = std::abs(ci95(acc) - 1.96 * std::sqrt(0.025) / std::sqrt(5.0));
    Eigen::Matrix2i c;
    c << 1, 1, 0, 0;
    const auto r = eval::prf1(c);
    const bool ok = ci_err <= 1e-12 && r.per_class[0].precision == 1.0 && r.per_class[0].recall == 0.5 &&
                    std::abs(r.per_class[0].f1 - 2.0 / 3.0) <= 1e-15 && r.per_class[1].recall_undefined;
    return {"ci95 closed form and prf1 counting", ok, "ci95 deviation " + std::to_string(ci_err)};
}

OracleEntry op_identities() {
    Rng rng(9);
    const auto x = random_tensor({2, 1, 5, 6}, rng, false);
    std::vector<double> k(9, 0.0);
    k[4] = 1.0;
    Tape tape(Tape::Mode::NoGrad);
    const auto y = conv2d_3x3(tape, x, Tensor({1, 1, 3, 3}, k), Tensor::zeros({1}));
    bool ok = true;
    for (std::size_t i = 0; i < x.size(); ++i) ok = ok && y[i] == x[i];
    const auto lp = log_softmax(tape, random_tensor({6, 5}, rng, false));
    double worst = 0.0;
    for (std::size_t r = 0; r < 6; ++r) {
        double s = 0.0;
        for (std::size_t j = 0; j < 5; ++j) s += std::exp(lp[r * 5 + j]);
        worst = std::max(worst, std::abs(std::log(s)));
    }
    return {"delta-kernel conv identity and log_softmax normalization", ok && worst <= 1e-10,
            "max |logsumexp| " + std::to_string(worst)};
}

} // namespace

bool SelfTestReport::passed() const {
    if (max_gradient_error > tolerance) return false;
    for (const auto& o : oracles)
        if (!o.passed) return false;
    return true;
}

SelfTestReport run_self_test(std::size_t seeds, double tolerance) {
    const auto start = std::chrono::steady_clock::now();
    SelfTestReport report;
    report.seeds = seeds;
    report.tolerance = tolerance;
    std::map<std::string, double> worst;
    gradient_checks(seeds, worst);
    for (const auto& [name, err] : worst) {
        report.gradients.push_back({name, err});
        report.max_gradient_error = std::max(report.max_gradient_error, err);
    }
    report.oracles = {prototype_oracle(), metric_oracle(), op_identities()};
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

} // namespace protofs::app
