#pragma once

#include <string>

#include "json.hpp"
#include "protofs/eval/ablation.hpp"
#include "protofs/eval/meta_test.hpp"

namespace protofs::eval {

nlohmann::json to_json(const Prf1Report& metrics, const std::vector<std::string>& labels);
nlohmann::json to_json(const EvalReport& report);
nlohmann::json to_json(const AblationTable& table);

/// "5-way 5-shot" style label.
std::string setting_label(const episodes::TaskSetting& setting);

/// Accuracy, CI and per-class P/R/F1 as aligned text.
std::string format_report(const EvalReport& report);
/// Rows are configurations, columns dataset x setting, cells "mean ± ci95" in percent.
std::string format_table(const AblationTable& table);

} // namespace protofs::eval
