#pragma once

#include <istream>
#include <stdexcept>
#include <string>
#include <vector>

namespace nunet {

/// Malformed CSV input; `line` is 1-based and counts the header.
class CsvError : public std::runtime_error
{
public:
  CsvError(std::size_t line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line)
  {
  }

  std::size_t line() const { return line_; }

private:
  std::size_t line_;
};

/// Splits one line on commas; no quoting.
std::vector<std::string> split_csv_line(const std::string& line);

/// Strict double parse of a whole field.
double parse_number(const std::string& field, std::size_t line);

/// Ground-truth volume table: case_id,systolic_ml,diastolic_ml.
struct VolumeTableRow
{
  std::string case_id;
  double systolic_ml = 0.0;
  double diastolic_ml = 0.0;

  friend bool operator==(const VolumeTableRow&, const VolumeTableRow&) = default;
};

std::vector<VolumeTableRow> parse_volume_table(std::istream& in);
std::vector<VolumeTableRow> read_volume_table(const std::string& path);

/// Paired parameter table: case_id,truth,pred.
struct PairedRow
{
  std::string case_id;
  double truth = 0.0;
  double pred = 0.0;
};

std::vector<PairedRow> parse_paired_csv(std::istream& in);
std::vector<PairedRow> read_paired_csv(const std::string& path);

}  // namespace nunet
