#include "nunet/volumetrics.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace nunet {

const char* to_string(Region r)
{
  switch (r) {
    case Region::LvEndo: return "lv_endo";
    case Region::LvEpi: return "lv_epi";
    case Region::RvEndo: return "rv_endo";
    case Region::RvEpi: return "rv_epi";
  }
  return "?";
}

Region parse_region(const std::string& name)
{
  for (Region r : {Region::LvEndo, Region::LvEpi, Region::RvEndo, Region::RvEpi})
    if (name == to_string(r))
      return r;
  throw std::invalid_argument("unknown region '" + name + "'");
}

bool in_region(std::uint8_t code, Region region)
{
  switch (region) {
    case Region::LvEndo: return code == std::uint8_t(Label::LvPool);
    case Region::LvEpi: return code == std::uint8_t(Label::LvPool) || code == std::uint8_t(Label::LvMyo);
    case Region::RvEndo: return code == std::uint8_t(Label::RvPool);
    case Region::RvEpi: return code == std::uint8_t(Label::RvPool) || code == std::uint8_t(Label::RvMyo);
  }
  return false;
}

std::int64_t region_pixels(const LabelMask& mask, Region region)
{
  const auto& l = mask.labels();
  switch (region) {
    case Region::LvEndo: return (l == std::uint8_t(Label::LvPool)).count();
    case Region::LvEpi:
      return (l == std::uint8_t(Label::LvPool)).count() + (l == std::uint8_t(Label::LvMyo)).count();
    case Region::RvEndo: return (l == std::uint8_t(Label::RvPool)).count();
    case Region::RvEpi:
      return (l == std::uint8_t(Label::RvPool)).count() + (l == std::uint8_t(Label::RvMyo)).count();
  }
  return 0;
}

double simpson_volume(std::span<const LabelMask> slices, Region region, const Spacing& spacing)
{
  spacing.validate();
  if (slices.empty())
    return 0.0;
  const auto w = slices.front().width();
  const auto h = slices.front().height();
  std::int64_t pixels = 0;
  for (const auto& s : slices) {
    if (s.width() != w || s.height() != h)
      throw std::invalid_argument("simpson_volume: slices have inconsistent dimensions");
    pixels += region_pixels(s, region);
  }
  // mm^3 -> ml
  return static_cast<double>(pixels) * spacing.dx * spacing.dy * spacing.dz / 1000.0;
}

VolumeCurve volume_curve(const MaskStack& stack, Region region, const Spacing& spacing)
{
  VolumeCurve curve;
  curve.volumes_ml.reserve(stack.n_frames());
  for (std::size_t f = 0; f < stack.n_frames(); ++f) {
    const auto slices = stack.frame(f);
    curve.volumes_ml.push_back(simpson_volume(slices, region, spacing));
  }
  return curve;
}

PhaseDetection detect_phases(const VolumeCurve& curve)
{
  const auto& v = curve.volumes_ml;
  if (v.size() < 2)
    throw std::invalid_argument("detect_phases needs at least two frames");
  PhaseDetection out;
  for (std::size_t f = 1; f < v.size(); ++f) {
    if (v[f] < v[out.es_frame])
      out.es_frame = f;
    if (v[f] > v[out.ed_frame])
      out.ed_frame = f;
  }
  out.degenerate = v[out.es_frame] == v[out.ed_frame];
  return out;
}

EjectionFraction ejection_fraction(double edv_ml, double esv_ml)
{
  if (!(edv_ml > 0.0))
    throw std::invalid_argument("ejection_fraction: EDV must be positive");
  if (!(esv_ml >= 0.0))
    throw std::invalid_argument("ejection_fraction: ESV must be non-negative");
  return {100.0 * (edv_ml - esv_ml) / edv_ml, esv_ml > edv_ml};
}

double ventricular_mass(double v_epi_ml, double v_endo_ml)
{
  if (!(v_endo_ml >= 0.0) || !(v_epi_ml >= v_endo_ml))
    throw std::invalid_argument("ventricular_mass: requires v_epi >= v_endo >= 0");
  return kMyocardialDensity * (v_epi_ml - v_endo_ml);
}

const char* to_string(VentricleStatus s)
{
  switch (s) {
    case VentricleStatus::Ok: return "ok";
    case VentricleStatus::Absent: return "absent";
    case VentricleStatus::UndefinedEf: return "undefined_ef";
  }
  return "?";
}

namespace {

VentricleReport ventricle(const MaskStack& stack, const Spacing& spacing, Region endo, Region epi)
{
  VentricleReport r;
  r.endo_curve = volume_curve(stack, endo, spacing);
  r.epi_curve = volume_curve(stack, epi, spacing);

  bool any = false;
  for (double v : r.epi_curve.volumes_ml)
    any = any || v > 0.0;
  if (!any) {
    r.status = VentricleStatus::Absent;
    return r;
  }

  if (stack.n_frames() >= 2) {
    const auto phases = detect_phases(r.endo_curve);
    r.es_frame = phases.es_frame;
    r.ed_frame = phases.ed_frame;
    r.degenerate_curve = phases.degenerate;
  } else {
    r.degenerate_curve = true;
  }
  r.esv = r.endo_curve.volumes_ml[r.es_frame];
  r.edv = r.endo_curve.volumes_ml[r.ed_frame];
  r.sv = r.edv - r.esv;
  r.vm = ventricular_mass(r.epi_curve.volumes_ml[r.ed_frame], r.edv);
  if (r.edv > 0.0) {
    r.ef = ejection_fraction(r.edv, r.esv).percent;
    r.status = VentricleStatus::Ok;
  } else {
    r.status = VentricleStatus::UndefinedEf;
  }
  return r;
}

std::string fmt(double v)
{
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

VolumeReport full_report(const MaskStack& stack, const Spacing& spacing)
{
  spacing.validate();
  return {ventricle(stack, spacing, Region::LvEndo, Region::LvEpi),
          ventricle(stack, spacing, Region::RvEndo, Region::RvEpi)};
}

std::string volume_csv_header()
{
  return "case_id,lv_esv,lv_edv,lv_ef,lv_sv,lv_vm,rv_esv,rv_edv,rv_ef,rv_sv,rv_vm,es_frame,ed_frame";
}

std::string volume_csv_row(const std::string& case_id, const VolumeReport& report)
{
  std::ostringstream os;
  os << case_id;
  for (const auto* v : {&report.lv, &report.rv}) {
    const bool volumes = v->status != VentricleStatus::Absent;
    os << ',' << (volumes ? fmt(v->esv) : "NA") << ',' << (volumes ? fmt(v->edv) : "NA") << ','
       << (v->ok() ? fmt(v->ef) : "NA") << ',' << (volumes ? fmt(v->sv) : "NA") << ','
       << (volumes ? fmt(v->vm) : "NA");
  }
  // Phase columns follow the LV, falling back to the RV.
  const VentricleReport* phase = report.lv.status != VentricleStatus::Absent ? &report.lv
                                 : report.rv.status != VentricleStatus::Absent ? &report.rv
                                                                               : nullptr;
  if (phase)
    os << ',' << phase->es_frame << ',' << phase->ed_frame;
  else
    os << ",NA,NA";
  return os.str();
}

std::string to_json(const VolumeReport& report, const std::string& case_id)
{
  auto ventricle_json = [](const VentricleReport& v) {
    nlohmann::json j{{"status", to_string(v.status)}};
    if (v.status != VentricleStatus::Absent) {
      j["esv_ml"] = v.esv;
      j["edv_ml"] = v.edv;
      j["sv_ml"] = v.sv;
      j["vm_g"] = v.vm;
      j["es_frame"] = v.es_frame;
      j["ed_frame"] = v.ed_frame;
      j["degenerate_curve"] = v.degenerate_curve;
      j["endo_curve_ml"] = v.endo_curve.volumes_ml;
      j["epi_curve_ml"] = v.epi_curve.volumes_ml;
    }
    j["ef_percent"] = v.ok() ? nlohmann::json(v.ef) : nlohmann::json(nullptr);
    return j;
  };
  nlohmann::json j{{"lv", ventricle_json(report.lv)}, {"rv", ventricle_json(report.rv)}};
  if (!case_id.empty())
    j["case_id"] = case_id;
  return j.dump(2);
}

}  // namespace nunet
