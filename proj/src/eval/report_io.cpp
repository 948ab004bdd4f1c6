#include "protofs/eval/report_io.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace protofs::eval {

namespace {

nlohmann::json setting_json(const episodes::TaskSetting& s) {
    return {{"way", s.way}, {"shot", s.shot}, {"queries", s.queries}};
}

std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

std::string pad(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

} // namespace

std::string setting_label(const episodes::TaskSetting& setting) {
    return std::to_string(setting.way) + "-way " + std::to_string(setting.shot) + "-shot";
}

nlohmann::json to_json(const Prf1Report& metrics, const std::vector<std::string>& labels) {
    nlohmann::json per_class = nlohmann::json::array();
    for (std::size_t c = 0; c < metrics.per_class.size(); ++c) {
        const auto& m = metrics.per_class[c];
        per_class.push_back({{"label", c < labels.size() ? labels[c] : std::to_string(c)},
                             {"support", m.support},
                             {"precision", m.precision},
                             {"recall", m.recall},
                             {"f1", m.f1},
                             {"precision_undefined", m.precision_undefined},
                             {"recall_undefined", m.recall_undefined},
                             {"f1_undefined", m.f1_undefined}});
    }
    nlohmann::json excluded = nlohmann::json::array();
    for (auto c : metrics.excluded) excluded.push_back(c < labels.size() ? labels[c] : std::to_string(c));
    return {{"per_class", per_class},
            {"macro", {{"precision", metrics.macro_precision}, {"recall", metrics.macro_recall}, {"f1", metrics.macro_f1}}},
            {"excluded_zero_support", excluded}};
}

nlohmann::json to_json(const EvalReport& r) {
    nlohmann::json confusion = nlohmann::json::array();
    for (Eigen::Index i = 0; i < r.confusion.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < r.confusion.cols(); ++j) row.push_back(r.confusion(i, j));
        confusion.push_back(row);
    }
    return {{"dataset", r.dataset},
            {"setting", setting_json(r.setting)},
            {"seed", r.seed},
            {"n_tasks", r.n_tasks},
            {"mean_accuracy", r.mean_accuracy},
            {"ci95", r.ci95},
            {"correct", r.correct},
            {"queries", r.queries},
            {"task_accuracies", r.task_accuracies},
            {"class_labels", r.class_labels},
            {"confusion", confusion},
            {"metrics", to_json(r.metrics, r.class_labels)}};
}

nlohmann::json to_json(const AblationTable& t) {
    nlohmann::json settings = nlohmann::json::array();
    for (const auto& s : t.settings) settings.push_back(setting_json(s));
    nlohmann::json cells = nlohmann::json::array();
    for (std::size_t r = 0; r < t.rows.size(); ++r)
        for (std::size_t d = 0; d < t.datasets.size(); ++d)
            for (std::size_t s = 0; s < t.settings.size(); ++s) {
                const auto& cell = t.at(r, d, s);
                nlohmann::json j{{"row", t.rows[r]}, {"dataset", t.datasets[d]}, {"setting", setting_json(t.settings[s])}};
                if (cell.report) {
                    j["mean_accuracy"] = cell.report->mean_accuracy;
                    j["ci95"] = cell.report->ci95;
                    j["report"] = to_json(*cell.report);
                } else {
                    j["error"] = cell.error;
                }
                cells.push_back(j);
            }
    return {{"rows", t.rows}, {"datasets", t.datasets}, {"settings", settings}, {"row_errors", t.row_errors},
            {"cells", cells}};
}

std::string format_report(const EvalReport& r) {
    std::ostringstream out;
    out << r.dataset << "  " << setting_label(r.setting) << "  n=" << r.setting.queries << "  tasks=" << r.n_tasks << '\n';
    out << "accuracy " << fixed(100.0 * r.mean_accuracy, 2) << " +/- " << fixed(100.0 * r.ci95, 2) << " %\n";
    std::size_t width = 5;
    for (const auto& l : r.class_labels) width = std::max(width, l.size());
    out << pad("class", width) << "  support  precision  recall  f1\n";
    for (std::size_t c = 0; c < r.metrics.per_class.size(); ++c) {
        const auto& m = r.metrics.per_class[c];
        out << pad(r.class_labels[c], width) << "  " << pad(std::to_string(m.support), 7) << "  "
            << pad(fixed(m.precision, 4) + (m.precision_undefined ? "*" : ""), 9) << "  "
            << pad(fixed(m.recall, 4) + (m.recall_undefined ? "*" : ""), 6) << "  " << fixed(m.f1, 4) << '\n';
    }
    out << pad("macro", width) << "           " << pad(fixed(r.metrics.macro_precision, 4), 9) << "  "
        << pad(fixed(r.metrics.macro_recall, 4), 6) << "  " << fixed(r.metrics.macro_f1, 4) << '\n';
    return out.str();
}

std::string format_table(const AblationTable& t) {
    std::vector<std::vector<std::string>> grid;
    std::vector<std::string> header{"configuration"};
    for (const auto& d : t.datasets)
        for (const auto& s : t.settings) header.push_back(d + " " + std::to_string(s.shot) + "-shot");
    grid.push_back(header);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        std::vector<std::string> line{t.rows[r]};
        for (std::size_t d = 0; d < t.datasets.size(); ++d)
            for (std::size_t s = 0; s < t.settings.size(); ++s) {
                const auto& cell = t.at(r, d, s);
                line.push_back(cell.report ? fixed(100.0 * cell.report->mean_accuracy, 2) + " ± " +
                                                 fixed(100.0 * cell.report->ci95, 2)
                                           : std::string("failed"));
            }
        grid.push_back(line);
    }
    // Column widths count code points so the ± sign aligns.
    auto display = [](const std::string& s) {
        return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char ch) { return (ch & 0xC0) != 0x80; }));
    };
    std::vector<std::size_t> widths(header.size(), 0);
    for (const auto& line : grid)
        for (std::size_t c = 0; c < line.size(); ++c) widths[c] = std::max(widths[c], display(line[c]));
    std::ostringstream out;
    for (const auto& line : grid) {
        for (std::size_t c = 0; c < line.size(); ++c) {
            out << line[c];
            if (c + 1 < line.size()) out << std::string(widths[c] - display(line[c]) + 2, ' ');
        }
        out << '\n';
    }
    return out.str();
}

} // namespace protofs::eval
