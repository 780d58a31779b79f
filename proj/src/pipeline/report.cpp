#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "satp/error.hpp"
#include "satp/pipeline/pipeline.hpp"

namespace satp {

namespace {

std::string g17(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string opt(const std::optional<double>& v) { return v ? g17(*v) : "null"; }

std::string str(const std::string& s) { return nlohmann::json(s).dump(); }

std::string moment_rows(const std::vector<SasResult>& rows, const std::string& indent) {
  if (rows.empty()) return "[]";
  std::ostringstream o;
  o << "[\n";
  for (std::size_t t = 0; t < rows.size(); ++t) {
    const auto& r = rows[t];
    o << indent << "  {\"moment\": " << t + 1 << ", \"aucoc_random\": " << g17(r.aucoc_random)
      << ", \"aucoc\": " << g17(r.aucoc_diag) << ", \"aucoc_optimal\": " << g17(r.aucoc_optimal)
      << ", \"sas\": " << opt(r.sas) << "}" << (t + 1 < rows.size() ? "," : "") << "\n";
  }
  o << indent << "]";
  return o.str();
}

std::string type_rows(const std::map<AgentType, TypeRow>& rows, const std::string& indent) {
  std::ostringstream o;
  o << "{\n";
  for (std::size_t k = 0; k < kAgentTypes.size(); ++k) {
    const AgentType type = kAgentTypes[k];
    auto it = rows.find(type);
    const TypeRow row = it == rows.end() ? TypeRow{} : it->second;
    o << indent << "  " << str(std::string(to_string(type))) << ": {\"count\": " << row.count
      << ", \"sas_ade\": " << opt(row.sas_ade) << ", \"sas_fde\": " << opt(row.sas_fde) << "}"
      << (k + 1 < kAgentTypes.size() ? "," : "") << "\n";
  }
  o << indent << "}";
  return o.str();
}

std::optional<double> opt_number(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

std::string cell(const std::optional<double>& v, const char* f = "%.4f") {
  if (!v) return "-";
  char buf[40];
  std::snprintf(buf, sizeof buf, f, *v);
  return buf;
}

}  // namespace

std::string report_json(const EvalReport& r) {
  std::ostringstream o;
  o << "{\n"
    << "  \"method\": " << str(r.method) << ",\n"
    << "  \"dataset\": " << str(r.dataset) << ",\n"
    << "  \"aucoc\": {\"ade\": " << g17(r.ade.aucoc_diag) << ", \"fde\": " << g17(r.fde.aucoc_diag) << "},\n"
    << "  \"sas\": {\"ade\": " << opt(r.ade.sas) << ", \"fde\": " << opt(r.fde.sas) << "},\n"
    << "  \"per_moment\": " << moment_rows(r.per_moment, "  ") << ",\n"
    << "  \"per_type\": " << type_rows(r.per_type, "  ") << ",\n"
    << "  \"total_parameters\": " << r.total_parameters << ",\n"
    << "  \"avg_ms_per_frame\": " << opt(r.avg_ms_per_frame) << ",\n"
    << "  \"seed\": " << r.seed << ",\n"
    << "  \"config_digest\": " << str(hex64(r.config_digest)) << ",\n"
    << "  \"samples\": " << r.samples << ",\n"
    << "  \"mean_ade_m\": " << g17(r.mean_ade) << ",\n"
    << "  \"mean_fde_m\": " << g17(r.mean_fde) << ",\n"
    << "  \"aucoc_random\": {\"ade\": " << g17(r.ade.aucoc_random) << ", \"fde\": " << g17(r.fde.aucoc_random)
    << "},\n"
    << "  \"aucoc_optimal\": {\"ade\": " << g17(r.ade.aucoc_optimal) << ", \"fde\": "
    << g17(r.fde.aucoc_optimal) << "}\n"
    << "}\n";
  return o.str();
}

std::string curve_csv(const CutoffCurve& c) {
  std::string out = "fraction,remaining_mean_error_m\n";
  for (std::size_t k = 0; k < c.fractions.size(); ++k) {
    out += g17(c.fractions[k]) + "," + g17(c.remaining_mean[k]) + "\n";
  }
  return out;
}

std::vector<EvalReport> read_reports(const std::vector<std::string>& texts) {
  std::vector<EvalReport> out;
  for (const auto& text : texts) {
    try {
      const auto j = nlohmann::json::parse(text);
      EvalReport r;
      r.method = j.at("method").get<std::string>();
      r.dataset = j.at("dataset").get<std::string>();
      r.ade.aucoc_diag = j.at("aucoc").at("ade").get<double>();
      r.fde.aucoc_diag = j.at("aucoc").at("fde").get<double>();
      r.ade.sas = opt_number(j.at("sas").at("ade"));
      r.fde.sas = opt_number(j.at("sas").at("fde"));
      r.total_parameters = j.at("total_parameters").get<std::size_t>();
      r.avg_ms_per_frame = opt_number(j.at("avg_ms_per_frame"));
      r.seed = j.at("seed").get<std::uint64_t>();
      r.config_digest = std::stoull(j.at("config_digest").get<std::string>(), nullptr, 16);
      r.samples = j.value("samples", std::size_t{0});
      r.mean_ade = j.value("mean_ade_m", 0.0);
      r.mean_fde = j.value("mean_fde_m", 0.0);
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("report: malformed metrics file: ") + e.what());
    }
  }
  return out;
}

std::string comparison_table(const std::vector<EvalReport>& reports) {
  std::ostringstream o;
  o << "| method | AUCOC ADE (m) | AUCOC FDE (m) | SAS ADE | SAS FDE | total parameters | ms/frame |\n"
    << "|---|---|---|---|---|---|---|\n";
  for (const auto& r : reports) {
    o << "| " << r.method << " | " << cell(r.ade.aucoc_diag) << " | " << cell(r.fde.aucoc_diag) << " | "
      << cell(r.ade.sas, "%.3f") << " | " << cell(r.fde.sas, "%.3f") << " | " << r.total_parameters << " | "
      << cell(r.avg_ms_per_frame, "%.2f") << " |\n";
  }
  return o.str();
}

std::string ablation_json(const AblationReport& a) {
  auto rows = [](const std::vector<AblationRow>& v) {
    std::ostringstream o;
    o << "[\n";
    for (std::size_t k = 0; k < v.size(); ++k) {
      const auto& r = v[k];
      o << "    {\"name\": " << str(r.name) << ", \"fusion\": " << str(std::string(to_string(r.fusion)))
        << ", \"estimator\": " << str(std::string(to_string(r.estimator)))
        << ", \"label_form\": " << str(std::string(to_string(r.label_form))) << ", \"training\": " << str(r.training)
        << ", \"sas_ade\": " << opt(r.sas_ade) << ", \"sas_fde\": " << opt(r.sas_fde)
        << ", \"error\": " << (r.error.empty() ? std::string("null") : str(r.error)) << "}"
        << (k + 1 < v.size() ? "," : "") << "\n";
    }
    o << "  ]";
    return o.str();
  };
  std::ostringstream o;
  o << "{\n"
    << "  \"structure\": " << rows(a.structure) << ",\n"
    << "  \"labels\": " << rows(a.labels) << ",\n"
    << "  \"training\": " << rows(a.training) << ",\n"
    << "  \"per_moment\": " << moment_rows(a.per_moment, "  ") << ",\n"
    << "  \"per_type\": " << type_rows(a.per_type, "  ") << "\n"
    << "}\n";
  return o.str();
}

}  // namespace satp
