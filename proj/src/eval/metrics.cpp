#include "protofs/eval/metrics.hpp"

#include <string>

#include "protofs/core/errors.hpp"

namespace protofs::eval {

Prf1Report prf1_counts(const CountMatrix& confusion) {
    if (confusion.rows() != confusion.cols()) {
        throw DimensionError("prf1: confusion matrix is " + std::to_string(confusion.rows()) + "x" +
                             std::to_string(confusion.cols()) + ", expected square");
    }
    if (confusion.size() > 0 && confusion.minCoeff() < 0) throw ContractError("prf1: negative count in confusion matrix");
    Prf1Report report;
    const auto k = confusion.rows();
    std::size_t included = 0;
    for (Eigen::Index c = 0; c < k; ++c) {
        const auto tp = confusion(c, c);
        const auto predicted = confusion.col(c).sum();
        const auto actual = confusion.row(c).sum();
        ClassMetrics m;
        m.support = actual;
        if (predicted == 0) m.precision_undefined = true;
        else m.precision = static_cast<double>(tp) / static_cast<double>(predicted);
        if (actual == 0) m.recall_undefined = true;
        else m.recall = static_cast<double>(tp) / static_cast<double>(actual);
        if (m.precision + m.recall == 0.0) m.f1_undefined = true;
        else m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
        if (actual == 0) {
            report.excluded.push_back(static_cast<std::size_t>(c));
        } else {
            report.macro_precision += m.precision;
            report.macro_recall += m.recall;
            report.macro_f1 += m.f1;
            ++included;
        }
        report.per_class.push_back(m);
    }
    if (included > 0) {
        report.macro_precision /= static_cast<double>(included);
        report.macro_recall /= static_cast<double>(included);
        report.macro_f1 /= static_cast<double>(included);
    }
    return report;
}

} // namespace protofs::eval
