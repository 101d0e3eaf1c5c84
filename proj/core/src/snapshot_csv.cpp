#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "mfcp/data.hpp"
#include "mfcp/errors.hpp"

namespace mfcp::data {

SnapshotSet::SnapshotSet(Matrix fields, Matrix coords, std::vector<std::string> names,
                         Matrix params, std::vector<std::string> param_names)
    : fields_(std::move(fields)),
      coords_(std::move(coords)),
      names_(std::move(names)),
      params_(std::move(params)),
      param_names_(std::move(param_names)) {
  if (fields_.cols() != names_.size())
    throw ValidationError("SnapshotSet: " + std::to_string(fields_.cols()) +
                          " field columns but " + std::to_string(names_.size()) + " names");
  if (coords_.cols() > 3) throw ValidationError("SnapshotSet: more than 3 coordinate columns");
  if (coords_.cols() > 0 && coords_.rows() != fields_.rows())
    throw ValidationError("SnapshotSet: coordinate rows do not match node count");
  if (coords_.cols() == 0) coords_ = Matrix(fields_.rows(), 0);
  if (params_.rows() == 0 && params_.cols() == 0) params_ = Matrix(names_.size(), 0);
  if (params_.rows() != names_.size())
    throw ValidationError("SnapshotSet: parameter rows do not match snapshot count");
  if (param_names_.size() != params_.cols())
    throw ValidationError("SnapshotSet: parameter names do not match parameter columns");
  std::set<std::string> seen;
  for (const auto& n : names_) {
    if (!seen.insert(n).second) throw ValidationError("SnapshotSet: duplicate snapshot name '" + n + "'");
  }
}

Matrix SnapshotSet::samples(std::span<const std::size_t> snapshot_idx) const {
  Matrix out(snapshot_idx.size(), nodes());
  for (std::size_t i = 0; i < snapshot_idx.size(); ++i) {
    const std::size_t c = snapshot_idx[i];
    if (c >= snapshots()) throw ValidationError("SnapshotSet::samples: index out of range");
    for (std::size_t r = 0; r < nodes(); ++r) out(i, r) = fields_(r, c);
  }
  return out;
}

std::optional<std::size_t> SnapshotSet::find(const std::string& name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names_.begin());
}

std::vector<std::size_t> SnapshotSet::indices_of(std::span<const std::string> wanted) const {
  std::unordered_map<std::string, std::size_t> lookup;
  for (std::size_t i = 0; i < names_.size(); ++i) lookup.emplace(names_[i], i);
  std::vector<std::size_t> out;
  out.reserve(wanted.size());
  for (const auto& w : wanted) {
    const auto it = lookup.find(w);
    if (it == lookup.end()) throw ValidationError("snapshot '" + w + "' not found");
    out.push_back(it->second);
  }
  return out;
}

SnapshotSet SnapshotSet::subset(std::span<const std::size_t> snapshot_idx) const {
  std::vector<std::string> names;
  for (std::size_t i : snapshot_idx) names.push_back(names_.at(i));
  return SnapshotSet(fields_.select_cols(snapshot_idx), coords_, std::move(names),
                     params_.select_rows(snapshot_idx), param_names_);
}

SnapshotSet SnapshotSet::with_nodes(Matrix fields, Matrix coords) const {
  return SnapshotSet(std::move(fields), std::move(coords), names_, params_, param_names_);
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_number(const std::string& cell, const std::string& where) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (cell.empty() || res.ec != std::errc() || res.ptr != last)
    throw ValidationError("non-numeric cell '" + cell + "' at " + where);
  return v;
}

std::vector<std::vector<std::string>> read_rows(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    rows.push_back(split_line(line));
  }
  if (rows.empty()) throw ValidationError("'" + path.string() + "' has no header row");
  return rows;
}

void check_name(const std::string& n) {
  if (n.empty() || n.find_first_of(",\n\r") != std::string::npos)
    throw ValidationError("snapshot/parameter name '" + n + "' cannot be written to CSV");
}

}  // namespace

SnapshotSet load_csv(const std::filesystem::path& fields_path,
                     const std::optional<std::filesystem::path>& params_path) {
  const auto rows = read_rows(fields_path);
  const auto& header = rows.front();
  if (header.empty() || header[0] != "node")
    throw ValidationError("'" + fields_path.string() + "': first header cell must be 'node'");
  static const char* kCoordNames[] = {"x", "y", "z"};
  std::size_t n_coords = 0;
  while (n_coords < 3 && 1 + n_coords < header.size() && header[1 + n_coords] == kCoordNames[n_coords])
    ++n_coords;
  const std::size_t first_snapshot = 1 + n_coords;
  std::vector<std::string> names(header.begin() + static_cast<std::ptrdiff_t>(first_snapshot),
                                 header.end());
  for (const auto& n : names)
    if (n.empty()) throw ValidationError("'" + fields_path.string() + "': empty snapshot name");

  const std::size_t d = rows.size() - 1;
  const std::size_t n = names.size();
  std::vector<double> fields(d * n);
  std::vector<double> coords(d * n_coords);
  for (std::size_t r = 0; r < d; ++r) {
    const auto& row = rows[r + 1];
    const std::string where = fields_path.string() + " line " + std::to_string(r + 2);
    if (row.size() != header.size())
      throw ValidationError("ragged row at " + where + ": expected " +
                            std::to_string(header.size()) + " cells, got " +
                            std::to_string(row.size()));
    parse_number(row[0], where);
    for (std::size_t k = 0; k < n_coords; ++k) coords[r * n_coords + k] = parse_number(row[1 + k], where);
    for (std::size_t c = 0; c < n; ++c) fields[r * n + c] = parse_number(row[first_snapshot + c], where);
  }

  Matrix params(n, 0);
  std::vector<std::string> param_names;
  if (params_path) {
    const auto prow = read_rows(*params_path);
    const auto& ph = prow.front();
    if (ph.empty() || ph[0] != "name")
      throw ValidationError("'" + params_path->string() + "': first header cell must be 'name'");
    param_names.assign(ph.begin() + 1, ph.end());
    const std::size_t p = param_names.size();
    std::unordered_map<std::string, std::vector<double>> by_name;
    for (std::size_t r = 1; r < prow.size(); ++r) {
      const std::string where = params_path->string() + " line " + std::to_string(r + 1);
      if (prow[r].size() != ph.size()) throw ValidationError("ragged row at " + where);
      std::vector<double> vals(p);
      for (std::size_t k = 0; k < p; ++k) vals[k] = parse_number(prow[r][1 + k], where);
      if (!by_name.emplace(prow[r][0], std::move(vals)).second)
        throw ValidationError("duplicate name '" + prow[r][0] + "' in " + params_path->string());
    }
    params = Matrix(n, p);
    for (std::size_t i = 0; i < n; ++i) {
      const auto it = by_name.find(names[i]);
      if (it == by_name.end())
        throw ValidationError("snapshot '" + names[i] + "' missing from " + params_path->string());
      std::copy(it->second.begin(), it->second.end(), params.row(i).begin());
    }
  }

  return SnapshotSet(Matrix(d, n, std::move(fields)), Matrix(d, n_coords, std::move(coords)),
                     std::move(names), std::move(params), std::move(param_names));
}

void save_csv(const SnapshotSet& set, const std::filesystem::path& fields_path,
              const std::optional<std::filesystem::path>& params_path) {
  static const char* kCoordNames[] = {"x", "y", "z"};
  for (const auto& n : set.names()) check_name(n);
  {
    std::ofstream out(fields_path);
    if (!out) throw ValidationError("cannot write '" + fields_path.string() + "'");
    out << "node";
    for (std::size_t k = 0; k < set.coords().cols(); ++k) out << ',' << kCoordNames[k];
    for (const auto& n : set.names()) out << ',' << n;
    out << '\n';
    for (std::size_t r = 0; r < set.nodes(); ++r) {
      out << r;
      for (std::size_t k = 0; k < set.coords().cols(); ++k) out << ',' << format_double(set.coords()(r, k));
      for (std::size_t c = 0; c < set.snapshots(); ++c) out << ',' << format_double(set.fields()(r, c));
      out << '\n';
    }
    if (!out) throw ValidationError("failed writing '" + fields_path.string() + "'");
  }
  if (params_path) {
    for (const auto& n : set.param_names()) check_name(n);
    std::ofstream out(*params_path);
    if (!out) throw ValidationError("cannot write '" + params_path->string() + "'");
    out << "name";
    for (const auto& p : set.param_names()) out << ',' << p;
    out << '\n';
    for (std::size_t i = 0; i < set.snapshots(); ++i) {
      out << set.names()[i];
      for (std::size_t k = 0; k < set.params().cols(); ++k) out << ',' << format_double(set.params()(i, k));
      out << '\n';
    }
    if (!out) throw ValidationError("failed writing '" + params_path->string() + "'");
  }
}

}  // namespace mfcp::data
