#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nunet/image.hpp"

namespace nunet {

/// Myocardial tissue density in g/cm^3.
inline constexpr double kMyocardialDensity = 1.05;

/// ENDO regions are the blood pool; EPI regions add the myocardium.
enum class Region
{
  LvEndo,
  LvEpi,
  RvEndo,
  RvEpi,
};

const char* to_string(Region r);
Region parse_region(const std::string& name);

/// True if `code` belongs to `region`.
bool in_region(std::uint8_t code, Region region);

std::int64_t region_pixels(const LabelMask& mask, Region region);

/// Simpson's method: sum of per-slice region areas times dz, in ml.
/// Slices must share dimensions.
double simpson_volume(std::span<const LabelMask> slices, Region region, const Spacing& spacing);

struct VolumeCurve
{
  std::vector<double> volumes_ml;

  std::size_t frame_count() const { return volumes_ml.size(); }
};

VolumeCurve volume_curve(const MaskStack& stack, Region region, const Spacing& spacing);

struct PhaseDetection
{
  std::size_t es_frame = 0;
  std::size_t ed_frame = 0;
  bool degenerate = false;  // constant curve
};

/// ES = argmin, ED = argmax, earliest frame on ties. Needs >= 2 frames.
PhaseDetection detect_phases(const VolumeCurve& curve);

struct EjectionFraction
{
  double percent = 0.0;
  bool esv_exceeds_edv = false;  // likely phase misdetection
};

EjectionFraction ejection_fraction(double edv_ml, double esv_ml);

/// rho * (v_epi - v_endo) in grams; volumes in ml (= cm^3).
double ventricular_mass(double v_epi_ml, double v_endo_ml);

enum class VentricleStatus
{
  Ok,
  Absent,        // no pool or myocardium labels anywhere in the stack
  UndefinedEf,   // labels present but EDV is zero
};

const char* to_string(VentricleStatus s);

struct VentricleReport
{
  VentricleStatus status = VentricleStatus::Absent;
  double esv = 0.0;
  double edv = 0.0;
  double ef = 0.0;
  double sv = 0.0;
  double vm = 0.0;
  std::size_t es_frame = 0;
  std::size_t ed_frame = 0;
  bool degenerate_curve = false;
  VolumeCurve endo_curve;
  VolumeCurve epi_curve;

  bool ok() const { return status == VentricleStatus::Ok; }
};

struct VolumeReport
{
  VentricleReport lv;
  VentricleReport rv;
};

/// Per-ventricle ESV/EDV/EF/SV from the endocardial curve; VM at that
/// ventricle's ED frame.
VolumeReport full_report(const MaskStack& stack, const Spacing& spacing);

std::string volume_csv_header();
/// One CSV row; unavailable values are written as NA.
std::string volume_csv_row(const std::string& case_id, const VolumeReport& report);
std::string to_json(const VolumeReport& report, const std::string& case_id = {});

}  // namespace nunet
