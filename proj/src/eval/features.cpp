#include "protofs/eval/features.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <Eigen/Eigenvalues>

#include "protofs/core/errors.hpp"
#include "protofs/core/log.hpp"
#include "protofs/core/parallel.hpp"
#include "protofs/data/loaders.hpp"

namespace protofs::eval {

namespace {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IndexingError("cannot write " + path.string());
    return out;
}

} // namespace

FeatureTable export_features(const net::Checkpoint& checkpoint, const episodes::DatasetIndex& index,
                             const std::optional<episodes::Split>& split, std::size_t threads) {
    std::vector<std::string> tag(index.num_classes(), "all");
    if (split) {
        for (auto c : split->train_classes) tag.at(c) = "train";
        for (auto c : split->val_classes) tag.at(c) = "val";
    }
    std::vector<episodes::SampleRef> refs;
    FeatureTable table;
    for (std::size_t c = 0; c < index.num_classes(); ++c)
        for (auto r : index.items[c]) {
            refs.push_back(r);
            table.labels.push_back(index.classes[c]);
            table.splits.push_back(tag[c]);
        }
    const auto d = static_cast<Eigen::Index>(checkpoint.backbone.embed_dim());
    table.features.resize(static_cast<Eigen::Index>(refs.size()), d);
    constexpr std::size_t kBatch = 64;
    const auto batches = (refs.size() + kBatch - 1) / kBatch;
    parallel_for(batches, threads, [&](std::size_t b) {
        const auto begin = b * kBatch, count = std::min(kBatch, refs.size() - begin);
        Tape tape(Tape::Mode::NoGrad);
        const auto x = data::gather_inputs(index, std::span(refs).subspan(begin, count), checkpoint.normalization);
        const auto emb = checkpoint.backbone.forward(tape, x);
        for (std::size_t i = 0; i < count; ++i)
            for (Eigen::Index j = 0; j < d; ++j)
                table.features(static_cast<Eigen::Index>(begin + i), j) = emb[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(j)];
    });
    return table;
}

void write_feature_csv(const FeatureTable& table, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "label,split";
    for (Eigen::Index j = 0; j < table.features.cols(); ++j) out << ",f" << j;
    out << '\n';
    for (Eigen::Index i = 0; i < table.features.rows(); ++i) {
        out << table.labels[static_cast<std::size_t>(i)] << ',' << table.splits[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < table.features.cols(); ++j) out << ',' << format_double(table.features(i, j));
        out << '\n';
    }
}

PcaResult project_pca(const Eigen::MatrixXd& features, std::size_t dims) {
    const auto n = features.rows(), d = features.cols();
    if (dims == 0 || dims > static_cast<std::size_t>(d)) {
        throw ConfigError("project_pca: cannot project " + std::to_string(d) + " features to " + std::to_string(dims) +
                          " dimensions");
    }
    if (n < 2) throw ConfigError("project_pca: need at least two samples");
    const Eigen::RowVectorXd mean = features.colwise().mean();
    const Eigen::MatrixXd centered = features.rowwise() - mean;
    const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) throw NumericError("project_pca: eigendecomposition failed");
    // Eigen returns ascending eigenvalues.
    const Eigen::VectorXd values = solver.eigenvalues().reverse().cwiseMax(0.0);
    const Eigen::MatrixXd vectors = solver.eigenvectors().rowwise().reverse();
    const double total = values.sum();
    const double floor = 1e-12 * std::max(values(0), 1e-300);

    PcaResult r;
    r.requested = dims;
    r.variances = values.head(static_cast<Eigen::Index>(dims));
    r.explained_ratio = total > 0.0 ? Eigen::VectorXd(r.variances / total) : Eigen::VectorXd::Zero(r.variances.size());
    std::size_t keep = 0;
    while (keep < dims && values(static_cast<Eigen::Index>(keep)) > floor) ++keep;
    if (keep < dims) {
        r.reduced = true;
        log_warning("project_pca: data have rank " + std::to_string(keep) + " < " + std::to_string(dims) +
                    "; reporting " + std::to_string(keep) + " dimensions");
    }
    r.components = vectors.leftCols(static_cast<Eigen::Index>(keep));
    for (Eigen::Index c = 0; c < r.components.cols(); ++c) {
        Eigen::Index arg = 0;
        r.components.col(c).cwiseAbs().maxCoeff(&arg);
        if (r.components(arg, c) < 0.0) r.components.col(c) *= -1.0;
    }
    r.coords = centered * r.components;
    return r;
}

void write_projection_csv(const std::vector<std::string>& labels, const PcaResult& pca,
                          const std::filesystem::path& path) {
    static const char* names[] = {"x", "y", "z"};
    auto out = open_out(path);
    out << "label";
    for (Eigen::Index c = 0; c < pca.coords.cols(); ++c) out << ',' << (c < 3 ? names[c] : "c" + std::to_string(c));
    out << '\n';
    for (Eigen::Index i = 0; i < pca.coords.rows(); ++i) {
        out << labels[static_cast<std::size_t>(i)];
        for (Eigen::Index c = 0; c < pca.coords.cols(); ++c) out << ',' << format_double(pca.coords(i, c));
        out << '\n';
    }
}

} // namespace protofs::eval
