#include "kmte/data_model.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>

namespace kmte {

const char* estimand_name(EstimandKind kind) {
  switch (kind) {
    case EstimandKind::Ate: return "ate";
    case EstimandKind::Dte: return "dte";
    case EstimandKind::Qte: return "qte";
    case EstimandKind::Late: return "late";
    case EstimandKind::Ldte: return "ldte";
    case EstimandKind::Lqte: return "lqte";
    case EstimandKind::Att: return "att";
    case EstimandKind::Dtt: return "dtt";
    case EstimandKind::Qtt: return "qtt";
  }
  return "?";
}

std::optional<EstimandKind> parse_estimand(std::string_view name) {
  static const std::array<EstimandKind, 9> all = {
      EstimandKind::Ate,  EstimandKind::Dte,  EstimandKind::Qte,
      EstimandKind::Late, EstimandKind::Ldte, EstimandKind::Lqte,
      EstimandKind::Att,  EstimandKind::Dtt,  EstimandKind::Qtt};
  for (EstimandKind kind : all) {
    if (name == estimand_name(kind)) return kind;
  }
  return std::nullopt;
}

bool estimand_is_scalar(EstimandKind kind) {
  return kind == EstimandKind::Ate || kind == EstimandKind::Late || kind == EstimandKind::Att;
}

bool estimand_needs_instrument(EstimandKind kind) {
  return kind == EstimandKind::Late || kind == EstimandKind::Ldte || kind == EstimandKind::Lqte;
}

bool estimand_needs_did_cells(EstimandKind kind) {
  return kind == EstimandKind::Att || kind == EstimandKind::Dtt || kind == EstimandKind::Qtt;
}

bool estimand_uses_tau_grid(EstimandKind kind) {
  return kind == EstimandKind::Qte || kind == EstimandKind::Lqte || kind == EstimandKind::Qtt;
}

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw ValidationError(message);
}

}  // namespace

CensoredSample::CensoredSample(SampleSchema schema, std::vector<double> q,
                               std::vector<std::uint8_t> delta, std::vector<std::uint8_t> treatment,
                               std::vector<double> covariates, std::vector<std::uint8_t> instrument,
                               std::vector<std::uint8_t> group, std::vector<std::uint8_t> period)
    : schema_(schema),
      q_(std::move(q)),
      delta_(std::move(delta)),
      treatment_(std::move(treatment)),
      covariates_(std::move(covariates)),
      instrument_(std::move(instrument)),
      group_(std::move(group)),
      period_(std::move(period)) {
  const std::size_t n = q_.size();
  require(n > 0, "sample is empty");
  require(delta_.size() == n, "delta column length mismatch");
  require(covariates_.size() == n * static_cast<std::size_t>(schema_.covariate_count),
          "covariate matrix size mismatch");
  auto check_flag = [&](const std::vector<std::uint8_t>& col, bool present, const char* name) {
    require(col.size() == (present ? n : 0), std::string(name) + " column length mismatch");
    for (std::uint8_t v : col) require(v <= 1, std::string("non-binary indicator in column ") + name);
  };
  check_flag(treatment_, schema_.has_treatment, "t");
  check_flag(instrument_, schema_.has_instrument, "z");
  check_flag(group_, schema_.has_group, "g");
  check_flag(period_, schema_.has_period, "period");
  for (std::uint8_t v : delta_) require(v <= 1, "non-binary indicator in column delta");
  for (double v : q_) require(std::isfinite(v), "non-finite q value");
  for (double v : covariates_) require(std::isfinite(v), "non-finite covariate value");
}

std::size_t CensoredSample::uncensored_count() const {
  std::size_t c = 0;
  for (std::uint8_t v : delta_) c += v;
  return c;
}

CensoredSample CensoredSample::subset(const std::vector<std::size_t>& rows) const {
  const std::size_t k = static_cast<std::size_t>(schema_.covariate_count);
  std::vector<double> q;
  std::vector<std::uint8_t> delta;
  std::vector<std::uint8_t> treatment;
  std::vector<double> covariates;
  std::vector<std::uint8_t> instrument;
  std::vector<std::uint8_t> group;
  std::vector<std::uint8_t> period;
  q.reserve(rows.size());
  delta.reserve(rows.size());
  covariates.reserve(rows.size() * k);
  for (std::size_t r : rows) {
    q.push_back(q_[r]);
    delta.push_back(delta_[r]);
    if (schema_.has_treatment) treatment.push_back(treatment_[r]);
    covariates.insert(covariates.end(), covariates_.begin() + r * k, covariates_.begin() + (r + 1) * k);
    if (schema_.has_instrument) instrument.push_back(instrument_[r]);
    if (schema_.has_group) group.push_back(group_[r]);
    if (schema_.has_period) period.push_back(period_[r]);
  }
  return CensoredSample(schema_, std::move(q), std::move(delta), std::move(treatment),
                        std::move(covariates), std::move(instrument), std::move(group),
                        std::move(period));
}

Observation CensoredSample::row(std::size_t i) const {
  Observation obs;
  obs.q = q_[i];
  obs.uncensored = delta_[i] != 0;
  const auto x = covariates(i);
  obs.x.assign(x.begin(), x.end());
  if (schema_.has_treatment) obs.treated = treated(i);
  if (schema_.has_instrument) obs.instrument = instrument(i);
  if (schema_.has_group) obs.group = group(i);
  if (schema_.has_period) obs.period = period(i);
  return obs;
}

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      fields.push_back(trim(std::string_view(line).substr(start, i - start)));
      start = i + 1;
    }
  }
  return fields;
}

double parse_number(const std::string& field, std::size_t line_no, const std::string& column) {
  double value = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || field.empty()) {
    throw ValidationError("non-numeric value '" + field + "' in column " + column + " at line " +
                          std::to_string(line_no));
  }
  return value;
}

std::uint8_t parse_binary(const std::string& field, std::size_t line_no, const std::string& column) {
  const double v = parse_number(field, line_no, column);
  if (v == 0.0) return 0;
  if (v == 1.0) return 1;
  throw ValidationError("non-binary indicator '" + field + "' in column " + column + " at line " +
                        std::to_string(line_no));
}

std::string format_double(double v) {
  std::array<char, 64> buf;
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

}  // namespace

LoadResult load_csv(const std::string& path, const LoadOptions& options) {
  std::ifstream in(path);
  require(in.good(), "cannot open file: " + path);

  std::string header_line;
  require(static_cast<bool>(std::getline(in, header_line)), "empty file: " + path);
  if (header_line.size() >= 3 && static_cast<unsigned char>(header_line[0]) == 0xEF &&
      static_cast<unsigned char>(header_line[1]) == 0xBB &&
      static_cast<unsigned char>(header_line[2]) == 0xBF) {
    header_line.erase(0, 3);
  }

  auto actual_name = [&](const std::string& canonical) {
    auto it = options.schema_hint.find(canonical);
    return it == options.schema_hint.end() ? canonical : it->second;
  };

  const std::vector<std::string> header = split_csv_line(header_line);
  std::vector<std::string> warnings;

  // Map column position -> role. Roles: 0 q, 1 delta, 2 t, 3 z, 4 g,
  // 5 period, 6+j covariate j, -1 ignored.
  std::vector<int> role(header.size(), -1);
  std::map<int, std::size_t> covariate_cols;  // covariate index (1-based) -> column
  std::map<std::string, std::size_t> named;
  for (std::size_t c = 0; c < header.size(); ++c) named[header[c]] = c;

  auto find_required = [&](const std::string& canonical, int r) {
    auto it = named.find(actual_name(canonical));
    require(it != named.end(), "missing required column: " + actual_name(canonical));
    role[it->second] = r;
  };
  auto find_optional = [&](const std::string& canonical, int r) {
    auto it = named.find(actual_name(canonical));
    if (it != named.end()) role[it->second] = r;
    return it != named.end();
  };

  find_required("q", 0);
  find_required("delta", 1);
  SampleSchema schema;
  schema.has_treatment = find_optional("t", 2);
  schema.has_instrument = find_optional("z", 3);
  schema.has_group = find_optional("g", 4);
  schema.has_period = find_optional("period", 5);

  for (std::size_t c = 0; c < header.size(); ++c) {
    if (role[c] != -1) continue;
    const std::string& name = header[c];
    if (name.size() >= 2 && name[0] == 'x') {
      bool digits = true;
      for (std::size_t i = 1; i < name.size(); ++i) digits = digits && std::isdigit(name[i]);
      if (digits) {
        const int idx = std::stoi(name.substr(1));
        require(idx >= 1, "covariate columns are numbered from x1");
        require(!covariate_cols.count(idx), "duplicate covariate column " + name);
        covariate_cols[idx] = c;
        continue;
      }
    }
    warnings.push_back("ignoring unrecognized column '" + name + "'");
  }
  schema.covariate_count = static_cast<int>(covariate_cols.size());
  int expected = 1;
  for (const auto& [idx, col] : covariate_cols) {
    require(idx == expected, "covariate columns must be contiguous x1..xk; missing x" +
                                 std::to_string(expected));
    ++expected;
  }

  std::vector<double> q;
  std::vector<std::uint8_t> delta;
  std::vector<std::uint8_t> treatment;
  std::vector<double> covariates;
  std::vector<std::uint8_t> instrument;
  std::vector<std::uint8_t> group;
  std::vector<std::uint8_t> period;

  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    require(fields.size() == header.size(),
            "row at line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                " fields, header has " + std::to_string(header.size()));
    std::vector<double> xrow(schema.covariate_count, 0.0);
    for (std::size_t c = 0; c < fields.size(); ++c) {
      switch (role[c]) {
        case 0: q.push_back(parse_number(fields[c], line_no, "q")); break;
        case 1: delta.push_back(parse_binary(fields[c], line_no, "delta")); break;
        case 2: treatment.push_back(parse_binary(fields[c], line_no, "t")); break;
        case 3: instrument.push_back(parse_binary(fields[c], line_no, "z")); break;
        case 4: group.push_back(parse_binary(fields[c], line_no, "g")); break;
        case 5: period.push_back(parse_binary(fields[c], line_no, "period")); break;
        default: break;
      }
    }
    for (const auto& [idx, col] : covariate_cols) {
      xrow[idx - 1] = parse_number(fields[col], line_no, "x" + std::to_string(idx));
    }
    covariates.insert(covariates.end(), xrow.begin(), xrow.end());
  }
  require(!q.empty(), "empty file: " + path + " (no data rows)");

  return LoadResult{CensoredSample(schema, std::move(q), std::move(delta), std::move(treatment),
                                   std::move(covariates), std::move(instrument), std::move(group),
                                   std::move(period)),
                    std::move(warnings)};
}

void write_csv(const CensoredSample& sample, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "cannot open file for writing: " + path);
  const SampleSchema& schema = sample.schema();

  out << "q,delta";
  if (schema.has_treatment) out << ",t";
  if (schema.has_instrument) out << ",z";
  if (schema.has_group) out << ",g";
  if (schema.has_period) out << ",period";
  for (int j = 1; j <= schema.covariate_count; ++j) out << ",x" << j;
  out << "\n";

  for (std::size_t i = 0; i < sample.size(); ++i) {
    out << format_double(sample.q(i)) << ',' << (sample.uncensored(i) ? 1 : 0);
    if (schema.has_treatment) out << ',' << (sample.treated(i) ? 1 : 0);
    if (schema.has_instrument) out << ',' << (sample.instrument(i) ? 1 : 0);
    if (schema.has_group) out << ',' << (sample.group(i) ? 1 : 0);
    if (schema.has_period) out << ',' << (sample.period(i) ? 1 : 0);
    for (double x : sample.covariates(i)) out << ',' << format_double(x);
    out << "\n";
  }
  require(out.good(), "write failed: " + path);
}

namespace {

GroupDiagnostic count_group(const CensoredSample& sample, const std::string& label,
                            const std::function<bool(std::size_t)>& in_group) {
  GroupDiagnostic g;
  g.label = label;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    if (!in_group(i)) continue;
    ++g.n;
    if (sample.uncensored(i)) ++g.uncensored;
  }
  return g;
}

void require_group(ValidationReport& report, const GroupDiagnostic& g) {
  if (g.n == 0) {
    report.pass = false;
    report.failures.push_back("required group cell is empty: " + g.label);
  } else if (g.uncensored == 0) {
    report.pass = false;
    report.failures.push_back("group has no uncensored observations: " + g.label);
  }
}

}  // namespace

ValidationReport validate_for_estimand(const CensoredSample& sample, EstimandKind kind) {
  ValidationReport report;
  const SampleSchema& schema = sample.schema();

  if (estimand_needs_did_cells(kind)) {
    if (!schema.has_group || !schema.has_period) {
      report.pass = false;
      report.failures.push_back("group and period columns required");
      return report;
    }
    for (int g = 0; g <= 1; ++g) {
      for (int j = 0; j <= 1; ++j) {
        GroupDiagnostic cell = count_group(
            sample, "g=" + std::to_string(g) + ",period=" + std::to_string(j),
            [&](std::size_t i) { return sample.group(i) == (g == 1) && sample.period(i) == (j == 1); });
        require_group(report, cell);
        report.groups.push_back(cell);
      }
    }
    return report;
  }

  if (!schema.has_treatment) {
    report.pass = false;
    report.failures.push_back("treatment column required");
    return report;
  }

  if (estimand_needs_instrument(kind)) {
    if (!schema.has_instrument) {
      report.pass = false;
      report.failures.push_back("instrument column required");
      return report;
    }
    for (int z = 0; z <= 1; ++z) {
      GroupDiagnostic arm = count_group(sample, "z=" + std::to_string(z), [&](std::size_t i) {
        return sample.instrument(i) == (z == 1);
      });
      require_group(report, arm);
      report.groups.push_back(arm);
    }
    // Empty (t, z) intersections are legitimate under one-sided compliance
    // and contribute zero to the estimator; report them as warnings.
    for (int t = 0; t <= 1; ++t) {
      for (int z = 0; z <= 1; ++z) {
        GroupDiagnostic cell = count_group(
            sample, "t=" + std::to_string(t) + ",z=" + std::to_string(z),
            [&](std::size_t i) { return sample.treated(i) == (t == 1) && sample.instrument(i) == (z == 1); });
        if (cell.n == 0) {
          report.warnings.push_back("cell is empty: " + cell.label);
        } else if (cell.uncensored == 0) {
          report.pass = false;
          report.failures.push_back("group has no uncensored observations: " + cell.label);
        }
        report.groups.push_back(cell);
      }
    }
    return report;
  }

  for (int t = 0; t <= 1; ++t) {
    GroupDiagnostic arm = count_group(sample, "t=" + std::to_string(t), [&](std::size_t i) {
      return sample.treated(i) == (t == 1);
    });
    require_group(report, arm);
    report.groups.push_back(arm);
  }
  return report;
}

StepDistribution StepDistribution::from_atoms(std::vector<std::pair<double, double>> atoms) {
  std::sort(atoms.begin(), atoms.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  StepDistribution dist;
  dist.jump_points_.reserve(atoms.size());
  dist.masses_.reserve(atoms.size());
  for (const auto& [point, mass] : atoms) {
    if (mass == 0.0) continue;
    if (mass < 0.0) throw std::invalid_argument("StepDistribution: negative mass");
    if (!dist.jump_points_.empty() && dist.jump_points_.back() == point) {
      dist.masses_.back() += mass;
    } else {
      dist.jump_points_.push_back(point);
      dist.masses_.push_back(mass);
    }
  }
  dist.cumulative_.resize(dist.masses_.size());
  double running = 0.0;
  for (std::size_t i = 0; i < dist.masses_.size(); ++i) {
    running += dist.masses_[i];
    dist.cumulative_[i] = running;
  }
  return dist;
}

double StepDistribution::cdf(double y) const {
  const auto it = std::upper_bound(jump_points_.begin(), jump_points_.end(), y);
  if (it == jump_points_.begin()) return 0.0;
  return cumulative_[static_cast<std::size_t>(it - jump_points_.begin()) - 1];
}

}  // namespace kmte
