#pragma once

#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedsim/orchestrator.hpp"

namespace fedsim {

constexpr const char* kArtifactVersion = "0.1.0";

/// All floats in emitted files carry 17 significant digits so that values
/// round-trip exactly.
inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace detail {

inline std::string json_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size() + 2);
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default: out += c;
        }
    }
    return out;
}

inline std::string json_number(double v) {
    if (std::isnan(v) || std::isinf(v)) return "null";
    return format_double(v);
}

inline std::string json_optional(const std::optional<double>& v) {
    return v ? json_number(*v) : "null";
}

inline std::string iso8601_utc(std::time_t t) {
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("io: cannot write " + path.string());
    return out;
}

}  // namespace detail

/// rounds.csv schema: t, selected_ids, loss, accuracy, recall_0..recall_{C-1},
/// sv_0..sv_{K-1}, proba_maverick, wall_time_ms. Cells without a value
/// (disabled Shapley, no exposed probabilities, timing off) stay empty.
inline void write_rounds_csv(std::ostream& out, const RunResult& result, std::size_t num_classes,
                             int selected_per_round, bool include_timing = false) {
    out << "t,selected_ids,loss,accuracy";
    for (std::size_t c = 0; c < num_classes; ++c) out << ",recall_" << c;
    for (int k = 0; k < selected_per_round; ++k) out << ",sv_" << k;
    out << ",proba_maverick,wall_time_ms\n";
    for (const auto& r : result.rounds) {
        out << r.round << ",";
        for (std::size_t i = 0; i < r.selected.size(); ++i) {
            if (i) out << ';';
            out << r.selected[i];
        }
        out << "," << format_double(r.loss) << "," << format_double(r.accuracy);
        for (std::size_t c = 0; c < num_classes; ++c) {
            const double recall = r.per_class_recall[c];
            out << ",";
            if (!std::isnan(recall)) out << format_double(recall);
        }
        for (int k = 0; k < selected_per_round; ++k) {
            out << ",";
            if (r.contribution && static_cast<std::size_t>(k) < r.contribution->shapley_values.size())
                out << format_double(r.contribution->shapley_values[static_cast<std::size_t>(k)]);
        }
        out << ",";
        if (!r.selection_probabilities.empty() && !result.maverick_ids.empty()) {
            double p = 0.0;
            for (int id : result.maverick_ids)
                p += r.selection_probabilities[static_cast<std::size_t>(id)];
            out << format_double(p);
        }
        out << ",";
        if (include_timing) out << format_double(r.wall_time_ms);
        out << "\n";
    }
}

inline void write_rounds_csv(const std::filesystem::path& path, const RunResult& result,
                             std::size_t num_classes, int selected_per_round,
                             bool include_timing = false) {
    auto out = detail::open_out(path);
    write_rounds_csv(out, result, num_classes, selected_per_round, include_timing);
}

inline void write_summary_json(const std::filesystem::path& path, const RunResult& result,
                               const SimulationConfig& config) {
    auto out = detail::open_out(path);
    const auto& last = result.rounds.back();
    out << "{\n";
    out << "  \"config_digest\": \"" << detail::json_escape(result.config_digest) << "\",\n";
    out << "  \"artifact_version\": \"" << kArtifactVersion << "\",\n";
    out << "  \"strategy\": {\n";
    out << "    \"name\": \"" << result.strategy << "\",\n";
    out << "    \"alpha\": " << detail::json_number(config.strategy_params.alpha) << ",\n";
    out << "    \"beta\": " << detail::json_number(config.strategy_params.beta) << ",\n";
    out << "    \"gamma\": " << detail::json_number(config.strategy_params.svb_gamma) << ",\n";
    out << "    \"epsilon\": " << detail::json_number(config.strategy_params.svb_epsilon) << ",\n";
    out << "    \"tier_probs\": [";
    for (std::size_t i = 0; i < config.strategy_params.tier_probs.size(); ++i)
        out << (i ? ", " : "") << detail::json_number(config.strategy_params.tier_probs[i]);
    out << "],\n";
    out << "    \"prox_mu\": " << detail::json_number(config.learner.prox_mu) << "\n";
    out << "  },\n";
    out << "  \"seed\": " << result.seed << ",\n";
    out << "  \"clients\": " << config.num_clients << ",\n";
    out << "  \"selected_per_round\": " << config.selected_per_round << ",\n";
    out << "  \"rounds\": " << result.rounds.size() << ",\n";
    out << "  \"classes\": " << result.num_classes << ",\n";
    out << "  \"aggregation\": \""
        << (config.aggregation == AggregationMode::fedavg ? "fedavg" : "fedsgd") << "\",\n";
    out << "  \"final_accuracy\": " << detail::json_number(last.accuracy) << ",\n";
    out << "  \"final_loss\": " << detail::json_number(last.loss) << ",\n";
    out << "  \"final_per_class_recall\": [";
    for (std::size_t c = 0; c < last.per_class_recall.size(); ++c)
        out << (c ? ", " : "") << detail::json_number(last.per_class_recall[c]);
    out << "],\n";
    out << "  \"final_maverick_recall\": " << detail::json_number(result.final_maverick_recall())
        << ",\n";
    out << "  \"maverick_ids\": [";
    for (std::size_t i = 0; i < result.maverick_ids.size(); ++i)
        out << (i ? ", " : "") << result.maverick_ids[i];
    out << "],\n";
    out << "  \"maverick_classes\": [";
    for (std::size_t i = 0; i < result.maverick_classes.size(); ++i)
        out << (i ? ", " : "") << result.maverick_classes[i];
    out << "],\n";
    out << "  \"fairness_U\": " << detail::json_optional(result.fairness_utility) << ",\n";
    out << "  \"r_at_99\": null,\n";
    out << "  \"mean_round_wall_ms\": " << detail::json_number(result.mean_round_wall_ms) << ",\n";
    out << "  \"test_split_digest\": \"" << result.test_split_digest << "\",\n";
    out << "  \"final_params_digest\": \"" << result.final_params_digest << "\"\n";
    out << "}\n";
}

inline void write_manifest_json(const std::filesystem::path& path, const std::string& digest,
                                std::time_t started, std::time_t finished,
                                const std::vector<std::string>& outputs) {
    auto out = detail::open_out(path);
    out << "{\n";
    out << "  \"config_digest\": \"" << detail::json_escape(digest) << "\",\n";
    out << "  \"artifact_version\": \"" << kArtifactVersion << "\",\n";
    out << "  \"started_at\": \"" << detail::iso8601_utc(started) << "\",\n";
    out << "  \"finished_at\": \"" << detail::iso8601_utc(finished) << "\",\n";
    out << "  \"outputs\": [";
    for (std::size_t i = 0; i < outputs.size(); ++i)
        out << (i ? ", " : "") << "\"" << detail::json_escape(outputs[i]) << "\"";
    out << "]\n";
    out << "}\n";
}

inline void write_partition_csv(std::ostream& out, const std::vector<ClientProfile>& profiles) {
    if (profiles.empty()) throw std::invalid_argument("partition csv: no profiles");
    const std::size_t num_classes = profiles.front().distribution.classes();
    out << "client_id,is_maverick,data_size";
    for (std::size_t c = 0; c < num_classes; ++c) out << ",count_" << c;
    out << "\n";
    for (const auto& p : profiles) {
        out << p.id << "," << (p.is_maverick ? 1 : 0) << "," << p.data_size;
        for (std::size_t c = 0; c < num_classes; ++c) out << "," << p.distribution.counts[c];
        out << "\n";
    }
}

/// Subset of summary.json needed to rebuild a RunInfo for comparisons.
struct StoredRun {
    RunInfo info;
    std::string config_digest;
    int rounds = 0;
};

inline StoredRun read_run_dir(const std::filesystem::path& dir) {
    const auto summary_path = dir / "summary.json";
    std::ifstream in(summary_path);
    if (!in) throw std::runtime_error("compare: cannot read " + summary_path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("compare: " + summary_path.string() + " is not valid JSON: " +
                                 e.what());
    }
    StoredRun run;
    run.config_digest = doc.at("config_digest").get<std::string>();
    run.rounds = doc.at("rounds").get<int>();
    run.info.strategy = doc.at("strategy").at("name").get<std::string>();
    run.info.seed = doc.at("seed").get<std::uint64_t>();
    run.info.num_classes = doc.at("classes").get<std::size_t>();
    run.info.test_split_digest = doc.at("test_split_digest").get<std::string>();
    run.info.final_accuracy = doc.at("final_accuracy").get<double>();
    if (doc.at("final_maverick_recall").is_null())
        run.info.final_maverick_recall = std::numeric_limits<double>::quiet_NaN();
    else
        run.info.final_maverick_recall = doc.at("final_maverick_recall").get<double>();
    if (!doc.at("fairness_U").is_null())
        run.info.fairness_utility = doc.at("fairness_U").get<double>();
    run.info.mean_round_wall_ms = doc.at("mean_round_wall_ms").get<double>();

    // accuracy series from rounds.csv (column 3, zero-based)
    const auto csv_path = dir / "rounds.csv";
    std::ifstream csv(csv_path);
    if (!csv) throw std::runtime_error("compare: cannot read " + csv_path.string());
    std::string line;
    if (!std::getline(csv, line))
        throw std::runtime_error("compare: " + csv_path.string() + " is empty");
    while (std::getline(csv, line)) {
        std::stringstream row(line);
        std::string cell;
        for (int i = 0; i <= 3; ++i)
            if (!std::getline(row, cell, ','))
                throw std::runtime_error("compare: malformed row in " + csv_path.string());
        run.info.accuracy.push_back(std::stod(cell));
    }
    return run;
}

inline std::string render_r_at(const std::optional<double>& mean, int horizon, int not_reached,
                               int replicates) {
    if (!mean) return ">" + std::to_string(horizon);
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.1f", *mean);
    std::string s = buf;
    if (not_reached > 0)
        s += " (" + std::to_string(not_reached) + "/" + std::to_string(replicates) + " >" +
             std::to_string(horizon) + ")";
    return s;
}

inline void write_comparison_csv(std::ostream& out, const std::vector<StrategyComparison>& table) {
    out << "strategy,replicates,r_at_99,not_reached,final_accuracy,final_maverick_recall,"
           "fairness_U,mean_round_wall_ms\n";
    for (const auto& row : table) {
        out << row.strategy << "," << row.replicates << ",";
        if (row.mean_rounds_to_threshold)
            out << format_double(*row.mean_rounds_to_threshold);
        else
            out << ">" << row.horizon;
        out << "," << row.not_reached << "," << format_double(row.mean_final_accuracy) << ",";
        if (!std::isnan(row.mean_final_maverick_recall))
            out << format_double(row.mean_final_maverick_recall);
        out << ",";
        if (row.mean_fairness_utility) out << format_double(*row.mean_fairness_utility);
        out << "," << format_double(row.mean_round_wall_ms) << "\n";
    }
}

inline void write_comparison_json(std::ostream& out,
                                  const std::vector<StrategyComparison>& table) {
    out << "{\n  \"strategies\": [\n";
    for (std::size_t i = 0; i < table.size(); ++i) {
        const auto& row = table[i];
        out << "    {\n";
        out << "      \"strategy\": \"" << detail::json_escape(row.strategy) << "\",\n";
        out << "      \"replicates\": " << row.replicates << ",\n";
        out << "      \"r_at_99\": " << detail::json_optional(row.mean_rounds_to_threshold)
            << ",\n";
        out << "      \"not_reached\": " << row.not_reached << ",\n";
        out << "      \"horizon\": " << row.horizon << ",\n";
        out << "      \"final_accuracy\": " << detail::json_number(row.mean_final_accuracy)
            << ",\n";
        out << "      \"final_maverick_recall\": "
            << detail::json_number(row.mean_final_maverick_recall) << ",\n";
        out << "      \"fairness_U\": " << detail::json_optional(row.mean_fairness_utility)
            << ",\n";
        out << "      \"mean_round_wall_ms\": " << detail::json_number(row.mean_round_wall_ms)
            << "\n";
        out << "    }" << (i + 1 < table.size() ? "," : "") << "\n";
    }
    out << "  ]\n}\n";
}

inline std::string render_comparison_table(const std::vector<StrategyComparison>& table) {
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"strategy", "runs", "R@99", "final_acc", "mav_recall", "fairness_U",
                    "ms/round"});
    char buf[64];
    for (const auto& row : table) {
        std::vector<std::string> cells;
        cells.push_back(row.strategy);
        cells.push_back(std::to_string(row.replicates));
        cells.push_back(render_r_at(row.mean_rounds_to_threshold, row.horizon, row.not_reached,
                                    row.replicates));
        std::snprintf(buf, sizeof(buf), "%.4f", row.mean_final_accuracy);
        cells.push_back(buf);
        if (std::isnan(row.mean_final_maverick_recall)) {
            cells.push_back("-");
        } else {
            std::snprintf(buf, sizeof(buf), "%.4f", row.mean_final_maverick_recall);
            cells.push_back(buf);
        }
        if (row.mean_fairness_utility) {
            std::snprintf(buf, sizeof(buf), "%.4f", *row.mean_fairness_utility);
            cells.push_back(buf);
        } else {
            cells.push_back("-");
        }
        std::snprintf(buf, sizeof(buf), "%.2f", row.mean_round_wall_ms);
        cells.push_back(buf);
        rows.push_back(std::move(cells));
    }
    std::vector<std::size_t> width(rows.front().size(), 0);
    for (const auto& r : rows)
        for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
    std::string out;
    for (const auto& r : rows) {
        for (std::size_t c = 0; c < r.size(); ++c) {
            out += r[c];
            if (c + 1 < r.size()) out += std::string(width[c] - r[c].size() + 2, ' ');
        }
        out += '\n';
    }
    return out;
}

}  // namespace fedsim
