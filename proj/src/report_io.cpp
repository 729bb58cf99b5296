#include "btltrack/report_io.hpp"

#include <boost/algorithm/string.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace btltrack {

namespace {

const char* const kColumns[] = {"variant", "kappa",        "iw",     "step",
                                "rmse_m",  "diverged_runs", "repairs"};

ResultRow base_row(const VariantReport& v, double iw) {
  ResultRow row;
  row.variant = v.variant.name();
  if (v.variant.rule.kind == RuleKind::UT) row.kappa = v.variant.rule.kappa;
  row.iw = iw;
  row.diverged_runs = v.diverged_runs;
  row.repairs = v.repairs;
  return row;
}

double parse_real(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw Error(ErrorCode::InvalidConfig, "malformed number '" + s + "' in result table");
  }
  return v;
}

template <typename Int>
Int parse_int(const std::string& s) {
  Int v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw Error(ErrorCode::InvalidConfig, "malformed integer '" + s + "' in result table");
  }
  return v;
}

}  // namespace

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string hex64(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::vector<ResultRow> curve_rows(const McReport& report, double iw) {
  std::vector<ResultRow> rows;
  for (const VariantReport& v : report.variants) {
    for (std::size_t k = 0; k < v.rmse_curve.size(); ++k) {
      ResultRow row = base_row(v, iw);
      row.step = static_cast<int>(k) + 1;
      row.rmse_m = v.rmse_curve[k];
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::vector<ResultRow> summary_rows(const McReport& report, double iw) {
  std::vector<ResultRow> rows;
  for (const VariantReport& v : report.variants) {
    ResultRow row = base_row(v, iw);
    row.rmse_m = v.time_avg_rmse;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_table(const ResultTable& table) {
  std::ostringstream os;
  os << "# schema=" << kResultSchemaVersion << "\n";
  for (const auto& [key, value] : table.meta) {
    if (key == "schema") continue;
    os << "# " << key << "=" << value << "\n";
  }
  for (std::size_t i = 0; i < std::size(kColumns); ++i) os << (i ? "\t" : "") << kColumns[i];
  os << "\n";
  for (const ResultRow& r : table.rows) {
    os << r.variant << "\t" << (r.kappa ? format_real(*r.kappa) : "-") << "\t"
       << format_real(r.iw) << "\t" << (r.step ? std::to_string(*r.step) : "avg") << "\t"
       << format_real(r.rmse_m) << "\t" << r.diverged_runs << "\t" << r.repairs << "\n";
  }
  return os.str();
}

ResultTable parse_table(const std::string& text) {
  ResultTable table;
  std::istringstream in(text);
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::string body = line.substr(1);
      boost::algorithm::trim(body);
      const auto eq = body.find('=');
      if (eq != std::string::npos) table.meta[body.substr(0, eq)] = body.substr(eq + 1);
      continue;
    }
    std::vector<std::string> cells;
    boost::algorithm::split(cells, line, boost::algorithm::is_any_of("\t"));
    if (!header_seen) {
      header_seen = true;
      if (cells.size() != std::size(kColumns) || cells[0] != kColumns[0]) {
        throw Error(ErrorCode::InvalidConfig, "unexpected result table header");
      }
      continue;
    }
    if (cells.size() != std::size(kColumns)) {
      throw Error(ErrorCode::InvalidConfig, "result row has wrong column count");
    }
    ResultRow r;
    r.variant = cells[0];
    if (cells[1] != "-") r.kappa = parse_real(cells[1]);
    r.iw = parse_real(cells[2]);
    if (cells[3] != "avg") r.step = parse_int<int>(cells[3]);
    r.rmse_m = parse_real(cells[4]);
    r.diverged_runs = parse_int<int>(cells[5]);
    r.repairs = parse_int<long>(cells[6]);
    table.rows.push_back(std::move(r));
  }
  const auto schema = table.meta.find("schema");
  if (schema == table.meta.end() || schema->second != std::to_string(kResultSchemaVersion)) {
    throw Error(ErrorCode::InvalidConfig, "missing or unsupported result schema");
  }
  return table;
}

void write_atomic(const std::filesystem::path& path, const std::string& contents) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::InvalidConfig, "cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw Error(ErrorCode::InvalidConfig, "short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

ResultTable read_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidConfig, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_table(ss.str());
}

}  // namespace btltrack
