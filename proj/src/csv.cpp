#include "nunet/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>

namespace nunet {

std::vector<std::string> split_csv_line(const std::string& line)
{
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  for (auto& f : out) {
    const auto b = f.find_first_not_of(" \t");
    const auto e = f.find_last_not_of(" \t");
    f = b == std::string::npos ? std::string{} : f.substr(b, e - b + 1);
  }
  return out;
}

double parse_number(const std::string& field, std::size_t line)
{
  double v = 0.0;
  const char* first = field.data();
  const char* last = first + field.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (field.empty() || ec != std::errc{} || ptr != last || !std::isfinite(v))
    throw CsvError(line, "not a number: '" + field + "'");
  return v;
}

namespace {

/// Reads a header-led CSV, checking the header and the field count, then
/// hands each data row to `row`. Blank lines are skipped.
void read_table(std::istream& in, const std::vector<std::string>& header,
                const std::function<void(const std::vector<std::string>&, std::size_t)>& row)
{
  std::string line;
  std::size_t n = 0;
  bool seen_header = false;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    auto fields = split_csv_line(line);
    if (!seen_header) {
      if (fields != header) {
        std::string want;
        for (const auto& h : header)
          want += (want.empty() ? "" : ",") + h;
        throw CsvError(n, "expected header '" + want + "'");
      }
      seen_header = true;
      continue;
    }
    if (fields.size() != header.size())
      throw CsvError(n, "expected " + std::to_string(header.size()) + " fields, got " +
                            std::to_string(fields.size()));
    row(fields, n);
  }
  if (!seen_header)
    throw CsvError(n == 0 ? 1 : n, "missing header row");
}

std::ifstream open(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open " + path);
  return in;
}

}  // namespace

std::vector<VolumeTableRow> parse_volume_table(std::istream& in)
{
  std::vector<VolumeTableRow> rows;
  std::set<std::string> ids;
  read_table(in, {"case_id", "systolic_ml", "diastolic_ml"}, [&](const auto& f, std::size_t line) {
    VolumeTableRow r{f[0], parse_number(f[1], line), parse_number(f[2], line)};
    if (r.case_id.empty())
      throw CsvError(line, "empty case_id");
    if (r.systolic_ml < 0.0 || r.diastolic_ml < 0.0)
      throw CsvError(line, "negative volume for case '" + r.case_id + "'");
    if (!ids.insert(r.case_id).second)
      throw CsvError(line, "duplicate case_id '" + r.case_id + "'");
    rows.push_back(std::move(r));
  });
  return rows;
}

std::vector<VolumeTableRow> read_volume_table(const std::string& path)
{
  auto in = open(path);
  return parse_volume_table(in);
}

std::vector<PairedRow> parse_paired_csv(std::istream& in)
{
  std::vector<PairedRow> rows;
  read_table(in, {"case_id", "truth", "pred"}, [&](const auto& f, std::size_t line) {
    rows.push_back({f[0], parse_number(f[1], line), parse_number(f[2], line)});
  });
  return rows;
}

std::vector<PairedRow> read_paired_csv(const std::string& path)
{
  auto in = open(path);
  return parse_paired_csv(in);
}

}  // namespace nunet
