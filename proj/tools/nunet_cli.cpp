// nunet: batch workflows over NIfTI stacks and CSV tables.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include "nunet/agreement.hpp"
#include "nunet/augment.hpp"
#include "nunet/csv.hpp"
#include "nunet/nifti.hpp"
#include "nunet/pipeline.hpp"
#include "nunet/rng.hpp"
#include "nunet/seg_metrics.hpp"
#include "nunet/topology.hpp"
#include "nunet/volumetrics.hpp"

namespace fs = std::filesystem;
using namespace nunet;

namespace {

constexpr std::uint64_t kDefaultSeed = 20190521;

struct RunConfig
{
  std::uint64_t seed = kDefaultSeed;
  bool seed_given = false;
  std::size_t workers = 1;
  std::size_t queue_depth = 2;
  std::optional<double> epsilon;
  std::string out = "nunet_out";
};

std::string num(double v)
{
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// One .nii file, or every .nii file of a directory in name order.
std::vector<fs::path> nifti_files(const std::string& where)
{
  const fs::path p(where);
  if (fs::is_regular_file(p))
    return {p};
  if (!fs::is_directory(p))
    throw std::runtime_error("no such file or directory: " + where);
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(p))
    if (e.is_regular_file() && e.path().extension() == ".nii")
      out.push_back(e.path());
  std::sort(out.begin(), out.end());
  if (out.empty())
    throw std::runtime_error("no .nii files in " + where);
  return out;
}

fs::path prepare_out(const RunConfig& rc)
{
  const fs::path out(rc.out);
  fs::create_directories(out);
  return out;
}

void write_text(const fs::path& path, const std::string& text)
{
  std::ofstream f(path, std::ios::binary);
  if (!f)
    throw std::runtime_error("cannot write " + path.string());
  f << text;
  if (!f)
    throw std::runtime_error("write failed: " + path.string());
}

template <class PlaneT>
void require_same_geometry(const Stack4D<PlaneT>& a, const MaskStack& b, const std::string& what)
{
  if (a.n_slices() != b.n_slices() || a.n_frames() != b.n_frames() || a.width() != b.width() ||
      a.height() != b.height())
    throw std::runtime_error(what + ": image and mask stacks differ in shape");
}

// ---------------------------------------------------------------------------
// augment

struct AugmentCase
{
  std::string id;
  NiftiDatatype image_type;
  NiftiDatatype mask_type;
  double dt;
  std::size_t n_slices, n_frames;
  double thickness, gap;
  std::size_t first_sample;  // dataset index of plane 0
};

struct AugmentArgs
{
  std::string images;
  std::string masks;
  std::string config;
  std::size_t n_per_sample = 1;
  std::size_t batch_size = 8;
};

int cmd_augment(const RunConfig& rc, const AugmentArgs& a)
{
  AugmentConfig config;
  std::uint64_t seed = rc.seed;
  if (!a.config.empty()) {
    const auto file = load_augment_config(a.config);
    config = file.config;
    if (file.seed && !rc.seed_given)
      seed = *file.seed;
  }
  if (rc.epsilon)
    config.epsilon = *rc.epsilon;
  config.validate();
  if (a.n_per_sample == 0 || a.batch_size == 0)
    throw std::invalid_argument("--n-per-sample and --batch-size must be positive");

  InMemoryDataset dataset;
  std::vector<AugmentCase> cases;
  std::vector<std::size_t> case_of_sample;
  for (const auto& img_path : nifti_files(a.images)) {
    const fs::path mask_path = fs::path(a.masks) / img_path.filename();
    if (!fs::exists(mask_path))
      throw std::runtime_error("no mask for " + img_path.filename().string() + " in " + a.masks);
    const NiftiHeader ih = read_nifti_header(img_path.string());
    const NiftiHeader mh = read_nifti_header(mask_path.string());
    const CineStack cine = read_nifti(img_path.string());
    const MaskStack mask = read_nifti_mask(mask_path.string());
    require_same_geometry(cine, mask, img_path.filename().string());

    AugmentCase c;
    c.id = img_path.stem().string();
    // Scaled integer payloads are rewritten as float so the scaling survives.
    const bool scaled = (ih.scl_slope != 0.0f && ih.scl_slope != 1.0f) || ih.scl_inter != 0.0f;
    c.image_type = scaled ? NiftiDatatype::Float32 : static_cast<NiftiDatatype>(ih.datatype);
    c.mask_type = static_cast<NiftiDatatype>(mh.datatype);
    c.dt = ih.dim[0] >= 4 && ih.pixdim[4] > 0.0f ? ih.pixdim[4] : 1.0;
    c.n_slices = cine.n_slices();
    c.n_frames = cine.n_frames();
    c.thickness = cine.slice_thickness();
    c.gap = cine.slice_gap();
    c.first_sample = dataset.size();
    for (std::size_t k = 0; k < cine.planes().size(); ++k) {
      dataset.add(cine.planes()[k], mask.planes()[k]);
      case_of_sample.push_back(cases.size());
    }
    cases.push_back(c);
  }

  // Repetition 0 uses the seed itself, later ones derive their own.
  std::vector<BatchRequest> requests;
  std::vector<std::size_t> rep_of_request;
  for (std::size_t rep = 0; rep < a.n_per_sample; ++rep) {
    const std::uint64_t rep_seed = rep == 0 ? seed : CounterRng(seed, rep).next_u64();
    for (std::size_t start = 0; start < dataset.size(); start += a.batch_size) {
      BatchRequest r;
      r.config = config;
      r.seed = rep_seed;
      for (std::size_t k = start; k < std::min(dataset.size(), start + a.batch_size); ++k)
        r.sample_indices.push_back(k);
      requests.push_back(std::move(r));
      rep_of_request.push_back(rep);
    }
  }

  const fs::path out = prepare_out(rc);
  fs::create_directories(out / "images");
  fs::create_directories(out / "masks");

  struct Pending
  {
    std::vector<Image> images;
    std::vector<LabelMask> masks;
    std::size_t filled = 0;
  };
  std::map<std::pair<std::size_t, std::size_t>, Pending> pending;  // (rep, case)
  std::string specs =
      "rep,case_id,slice,frame,seed,sample_index,rotation,sx,sy,hx,hy,tx,ty,flip_x,flip_y,"
      "plus_i,plus_j,plus_ij,plus_ii,plus_jj,minus_i,minus_j,minus_ij,minus_ii,minus_jj\n";
  std::size_t files_written = 0;

  auto consume = [&](const AugmentedBatch& b) {
    const std::size_t rep = rep_of_request[b.batch_serial];
    for (std::size_t k = 0; k < b.images.size(); ++k) {
      const AugmentSpec& s = b.specs[k];
      const std::size_t ci = case_of_sample[s.sample_index];
      const AugmentCase& c = cases[ci];
      const std::size_t local = s.sample_index - c.first_sample;
      const std::size_t n_planes = c.n_slices * c.n_frames;

      specs += std::to_string(rep) + "," + c.id + "," + std::to_string(local % c.n_slices) + "," +
               std::to_string(local / c.n_slices) + "," + std::to_string(s.seed) + "," +
               std::to_string(s.sample_index);
      for (double v : {s.affine.rotation, s.affine.sx, s.affine.sy, s.affine.hx, s.affine.hy, s.affine.tx,
                       s.affine.ty})
        specs += "," + num(v);
      specs += std::string(",") + (s.affine.flip_x ? "1" : "0") + "," + (s.affine.flip_y ? "1" : "0");
      for (double v : s.deform.plus)
        specs += "," + num(v);
      for (double v : s.deform.minus)
        specs += "," + num(v);
      specs += "\n";

      Pending& p = pending[{rep, ci}];
      if (p.images.empty()) {
        p.images.assign(n_planes, Image::zeros(1, 1));
        p.masks.assign(n_planes, LabelMask::zeros(1, 1));
      }
      p.images[local] = b.images[k];
      p.masks[local] = b.masks[k];
      if (++p.filled == n_planes) {
        const std::string name = c.id + "_aug" + std::to_string(rep) + ".nii";
        write_nifti(CineStack(c.n_slices, c.n_frames, std::move(p.images), c.thickness, c.gap),
                    (out / "images" / name).string(), c.image_type, c.dt);
        write_nifti(MaskStack(c.n_slices, c.n_frames, std::move(p.masks), c.thickness, c.gap),
                    (out / "masks" / name).string(), c.mask_type, c.dt);
        pending.erase({rep, ci});
        files_written += 2;
      }
    }
  };

  const PipelineStats stats = run_pipeline(dataset, requests, {rc.workers, rc.queue_depth}, consume);

  write_text(out / "specs.csv", specs);
  write_text(out / "config.json", to_json(config, seed) + "\n");
  // The only output that differs between identical runs: it holds timings.
  write_text(out / "stats.json", to_json(stats) + "\n");
  std::cout << "augmented " << dataset.size() * a.n_per_sample << " planes from " << cases.size()
            << " cases into " << files_written << " files\n"
            << to_json(stats) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// volumes

struct VolumeArgs
{
  std::string masks;
  std::optional<double> thickness, gap, dx, dy;
};

MaskStack with_overrides(const MaskStack& s, const VolumeArgs& a)
{
  if (!a.thickness && !a.gap && !a.dx && !a.dy)
    return s;
  const PixelSpacing px{a.dx.value_or(s.pixel_spacing().dx), a.dy.value_or(s.pixel_spacing().dy)};
  std::vector<LabelMask> planes;
  planes.reserve(s.planes().size());
  for (const auto& m : s.planes())
    planes.emplace_back(m.labels(), px);
  return MaskStack(s.n_slices(), s.n_frames(), std::move(planes), a.thickness.value_or(s.slice_thickness()),
                   a.gap.value_or(s.slice_gap()));
}

int cmd_volumes(const RunConfig& rc, const VolumeArgs& a)
{
  std::string csv = volume_csv_header() + "\n";
  nlohmann::json all = nlohmann::json::array();
  for (const auto& path : nifti_files(a.masks)) {
    const MaskStack s = with_overrides(read_nifti_mask(path.string()), a);
    const std::string id = path.stem().string();
    const VolumeReport rep = full_report(s, s.spacing());
    csv += volume_csv_row(id, rep) + "\n";
    all.push_back(nlohmann::json::parse(to_json(rep, id)));
    if (!rep.lv.ok() || !rep.rv.ok())
      std::cerr << "nunet: " << id << ": lv " << to_string(rep.lv.status) << ", rv " << to_string(rep.rv.status)
                << "\n";
  }
  const fs::path out = prepare_out(rc);
  write_text(out / "volumes.csv", csv);
  write_text(out / "volumes.json", all.dump(2) + "\n");
  std::cout << csv;
  return 0;
}

// ---------------------------------------------------------------------------
// metrics

struct MetricArgs
{
  std::string pred;
  std::string truth;
};

/// (phase name, frame) pairs from the truth LV pool curve, the RV pool when
/// the LV is absent.
std::vector<std::pair<std::string, std::size_t>> metric_phases(const MaskStack& truth)
{
  if (truth.n_frames() < 2)
    return {{"single", 0}};
  VolumeCurve curve = volume_curve(truth, Region::LvEndo, truth.spacing());
  if (std::all_of(curve.volumes_ml.begin(), curve.volumes_ml.end(), [](double v) { return v == 0.0; }))
    curve = volume_curve(truth, Region::RvEndo, truth.spacing());
  const PhaseDetection p = detect_phases(curve);
  return {{"ED", p.ed_frame}, {"ES", p.es_frame}};
}

int cmd_metrics(const RunConfig& rc, const MetricArgs& a)
{
  constexpr Region kRegions[] = {Region::LvEndo, Region::LvEpi, Region::RvEndo, Region::RvEpi};
  std::string csv = metric_csv_header() + "\n";
  std::map<std::pair<std::string, std::string>, std::pair<std::vector<double>, std::vector<double>>> pooled;

  for (const auto& truth_path : nifti_files(a.truth)) {
    const fs::path pred_path = fs::path(a.pred) / truth_path.filename();
    if (!fs::exists(pred_path))
      throw std::runtime_error("no prediction for " + truth_path.filename().string() + " in " + a.pred);
    const MaskStack truth = read_nifti_mask(truth_path.string());
    const MaskStack pred = read_nifti_mask(pred_path.string());
    require_same_geometry(pred, truth, truth_path.filename().string());
    const std::string id = truth_path.stem().string();

    for (const auto& [phase, frame] : metric_phases(truth)) {
      const auto pf = pred.frame(frame);
      const auto tf = truth.frame(frame);
      for (Region r : kRegions) {
        const MetricRow row = evaluate(id, phase, {pf, r}, {tf, r});
        csv += metric_csv_row(row) + "\n";
        auto& [d, j] = pooled[{phase, to_string(r)}];
        d.push_back(row.dice.value);
        j.push_back(row.overlap.value);
      }
    }
  }

  std::string summary = "phase,region,n,dice_mean,dice_std,overlap_mean,overlap_std\n";
  for (const auto& [key, vals] : pooled) {
    const MeanStd d = mean_std(vals.first);
    const MeanStd j = mean_std(vals.second);
    summary += key.first + "," + key.second + "," + std::to_string(d.n) + "," + num(d.mean) + "," + num(d.std) +
               "," + num(j.mean) + "," + num(j.std) + "\n";
  }
  const fs::path out = prepare_out(rc);
  write_text(out / "metrics.csv", csv);
  write_text(out / "metrics_summary.csv", summary);
  std::cout << summary;
  return 0;
}

// ---------------------------------------------------------------------------
// agree

struct AgreeArgs
{
  std::string pairs;
  std::string fit;
  std::string parameter = "parameter";
  bool crps = false;
};

PairedSeries to_series(const std::vector<PairedRow>& rows, const std::string& name)
{
  if (rows.empty())
    throw std::invalid_argument("paired table has no rows");
  Eigen::VectorXd t(static_cast<Eigen::Index>(rows.size())), p(t.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    t[static_cast<Eigen::Index>(i)] = rows[i].truth;
    p[static_cast<Eigen::Index>(i)] = rows[i].pred;
  }
  return PairedSeries(t, p, name);
}

int cmd_agree(const RunConfig& rc, const AgreeArgs& a)
{
  const auto rows = read_paired_csv(a.pairs);
  const PairedSeries series = to_series(rows, a.parameter);
  nlohmann::json j;
  j["raw"] = nlohmann::json::parse(to_json(agreement(series)));

  std::optional<PairedSeries> adjusted;
  std::optional<StyleAdjustment> adj;
  if (!a.fit.empty()) {
    adj = fit_no_intercept(to_series(read_paired_csv(a.fit), a.parameter));
    adjusted = apply_adjustment(*adj, series);
    AgreementReport r = agreement(*adjusted);
    r.adjustment = adj;
    j["adjusted"] = nlohmann::json::parse(to_json(r));
  }

  std::vector<double> crps;
  if (a.crps) {
    std::vector<std::pair<double, double>> pairs;
    for (const auto& r : rows) {
      pairs.emplace_back(r.pred, r.truth);
      crps.push_back(crps_case(r.pred, r.truth));
    }
    const CrpsResult res = crps_score(pairs);
    j["crps"] = {{"score", res.score}, {"clamped", res.clamped}, {"bins", kCrpsBins}};
  }

  std::string scatter = "case_id,truth,pred";
  scatter += adjusted ? ",pred_adjusted" : "";
  scatter += a.crps ? ",crps\n" : "\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    scatter += rows[i].case_id + "," + num(rows[i].truth) + "," + num(rows[i].pred);
    if (adjusted)
      scatter += "," + num(adjusted->pred()[static_cast<Eigen::Index>(i)]);
    if (a.crps)
      scatter += "," + num(crps[i]);
    scatter += "\n";
  }

  const fs::path out = prepare_out(rc);
  write_text(out / "agreement.json", j.dump(2) + "\n");
  write_text(out / "scatter.csv", scatter);
  if (adj) {
    // Line through the origin spanning the observed prediction range.
    const double lo = series.pred().minCoeff(), hi = series.pred().maxCoeff();
    write_text(out / "fit_line.csv", "slope,intercept,fit_n,x_min,x_max,y_min,y_max\n" + num(adj->slope) + ",0," +
                                         std::to_string(adj->fit_n) + "," + num(lo) + "," + num(hi) + "," +
                                         num(adj->slope * lo) + "," + num(adj->slope * hi) + "\n");
  }
  std::cout << j.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// crps

struct CrpsArgs
{
  std::string truth;
  std::string pred;
};

int cmd_crps(const RunConfig& rc, const CrpsArgs& a)
{
  const auto truth = read_volume_table(a.truth);
  std::map<std::string, VolumeTableRow> pred;
  for (const auto& r : read_volume_table(a.pred))
    pred.emplace(r.case_id, r);

  std::vector<std::pair<double, double>> pairs;
  std::string csv = "case_id,phase,pred_ml,truth_ml,crps\n";
  for (const auto& t : truth) {
    const auto it = pred.find(t.case_id);
    if (it == pred.end())
      throw std::runtime_error("case " + t.case_id + " missing from " + a.pred);
    for (const auto& [phase, p, v] : {std::tuple{"systolic", it->second.systolic_ml, t.systolic_ml},
                                      std::tuple{"diastolic", it->second.diastolic_ml, t.diastolic_ml}}) {
      pairs.emplace_back(p, v);
      csv += t.case_id + "," + phase + "," + num(p) + "," + num(v) + "," + num(crps_case(p, v)) + "\n";
    }
  }
  if (pairs.empty())
    throw std::invalid_argument("truth table has no cases");
  const CrpsResult res = crps_score(pairs);
  if (res.clamped > 0)
    std::cerr << "nunet: " << res.clamped << " volumes clamped into [0, " << kCrpsBins - 1 << "] ml\n";

  const fs::path out = prepare_out(rc);
  write_text(out / "crps.csv", csv);
  std::cout << csv << "score," << num(res.score) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// topology

struct TopologyArgs
{
  std::string config;
  std::string recipe_out;
};

int cmd_topology(const RunConfig&, const TopologyArgs& a)
{
  TopologyConfig config;
  if (!a.config.empty()) {
    std::ifstream f(a.config);
    if (!f)
      throw std::runtime_error("cannot read " + a.config);
    config = parse_topology_config(std::string(std::istreambuf_iterator<char>(f), {}));
  }
  const TopologyGraph g = build_topology(config);
  const auto shapes = infer_shapes(g, {config.input_h, config.input_w, config.in_channels});
  std::cout << layer_table(g, shapes, count_params(g));
  if (!a.recipe_out.empty())
    write_text(a.recipe_out, export_recipe(TrainingRecipe{}) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"nunet: cardiac MR augmentation, volumetrics and agreement tools"};
  app.require_subcommand(1);
  app.fallthrough();

  RunConfig rc;
  auto* seed_opt = app.add_option("--seed", rc.seed, "RNG seed")->capture_default_str();
  app.add_option("--workers", rc.workers, "Producer threads")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--queue-depth", rc.queue_depth, "Batches buffered ahead of the consumer")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_option("--epsilon", rc.epsilon, "Deformation bound override")->check(CLI::NonNegativeNumber);
  app.add_option("--out", rc.out, "Output directory")->capture_default_str();

  AugmentArgs aug;
  auto* c_aug = app.add_subcommand("augment", "Augment image/mask stacks through the batch pipeline");
  c_aug->add_option("--images", aug.images, "Image .nii file or directory")->required();
  c_aug->add_option("--masks", aug.masks, "Directory with masks of the same file names")->required();
  c_aug->add_option("--config", aug.config, "Augmentation config JSON");
  c_aug->add_option("--n-per-sample", aug.n_per_sample, "Augmented copies per plane")->capture_default_str();
  c_aug->add_option("--batch-size", aug.batch_size, "Planes per batch")->capture_default_str();

  VolumeArgs vol;
  auto* c_vol = app.add_subcommand("volumes", "Ventricular volumes, EF, SV and mass per mask stack");
  c_vol->add_option("--masks", vol.masks, "Mask .nii file or directory")->required();
  c_vol->add_option("--thickness", vol.thickness, "Slice thickness override (mm)")->check(CLI::PositiveNumber);
  c_vol->add_option("--gap", vol.gap, "Slice gap override (mm)")->check(CLI::NonNegativeNumber);
  c_vol->add_option("--dx", vol.dx, "Column spacing override (mm)")->check(CLI::PositiveNumber);
  c_vol->add_option("--dy", vol.dy, "Row spacing override (mm)")->check(CLI::PositiveNumber);

  MetricArgs met;
  auto* c_met = app.add_subcommand("metrics", "Per-case overlap metrics at ED and ES");
  c_met->add_option("--pred", met.pred, "Predicted mask directory")->required();
  c_met->add_option("--truth", met.truth, "Ground-truth mask file or directory")->required();

  AgreeArgs agr;
  auto* c_agr = app.add_subcommand("agree", "Agreement statistics of a paired parameter table");
  c_agr->add_option("--pairs", agr.pairs, "CSV with case_id,truth,pred")->required();
  c_agr->add_option("--fit", agr.fit, "CSV used to fit the no-intercept adjustment");
  c_agr->add_option("--parameter", agr.parameter, "Parameter name")->capture_default_str();
  c_agr->add_flag("--crps", agr.crps, "Also score the pairs as volumes");

  CrpsArgs crp;
  auto* c_crp = app.add_subcommand("crps", "CRPS of predicted against true volume tables");
  c_crp->add_option("--truth", crp.truth, "CSV with case_id,systolic_ml,diastolic_ml")->required();
  c_crp->add_option("--pred", crp.pred, "CSV with case_id,systolic_ml,diastolic_ml")->required();

  TopologyArgs top;
  auto* c_top = app.add_subcommand("topology", "Layer table and parameter count of the network");
  c_top->add_option("--config", top.config, "Topology config JSON");
  c_top->add_option("--recipe-out", top.recipe_out, "Write the training recipe manifest here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  rc.seed_given = seed_opt->count() > 0;

  try {
    if (*c_aug)
      return cmd_augment(rc, aug);
    if (*c_vol)
      return cmd_volumes(rc, vol);
    if (*c_met)
      return cmd_metrics(rc, met);
    if (*c_agr)
      return cmd_agree(rc, agr);
    if (*c_crp)
      return cmd_crps(rc, crp);
    if (*c_top)
      return cmd_topology(rc, top);
  } catch (const NiftiError& e) {
    std::cerr << "nunet: error [" << to_string(e.kind()) << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "nunet: error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
