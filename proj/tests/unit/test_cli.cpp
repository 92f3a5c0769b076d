#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "nunet/csv.hpp"
#include "nunet/nifti.hpp"

namespace fs = std::filesystem;
using namespace nunet;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "nunet_cli_test";

int run(const std::string& args)
{
  const std::string cmd = std::string(NUNET_CLI_PATH) + " " + args + " > " + (kRoot / "stdout.txt").string() +
                          " 2> " + (kRoot / "stderr.txt").string();
  const int rc = std::system(cmd.c_str());
  return rc == -1 ? -1 : WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p)
{
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

void write(const fs::path& p, const std::string& text)
{
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

/// Relative path -> contents for every file under `dir`, minus `skip`.
std::map<std::string, std::string> tree(const fs::path& dir, const std::string& skip = "stats.json")
{
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() != skip)
      out[fs::relative(e.path(), dir).string()] = slurp(e.path());
  return out;
}

/// Two cases of random cine data plus masks, one uint8 and one int16.
void make_dataset(const fs::path& dir)
{
  std::mt19937 rng(31);
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "masks");
  for (const auto& [name, type] : {std::pair{"caseA", NiftiDatatype::Uint8}, std::pair{"caseB", NiftiDatatype::Int16}}) {
    std::vector<Image> imgs;
    std::vector<LabelMask> masks;
    for (int k = 0; k < 3 * 2; ++k) {
      Plane<float> p(16, 12);
      LabelMask::plane_type m(16, 12);
      for (Eigen::Index i = 0; i < p.size(); ++i) {
        p.data()[i] = static_cast<float>(rng() % 250);
        m.data()[i] = static_cast<std::uint8_t>(rng() % 5);
      }
      imgs.emplace_back(p, PixelSpacing{1.4, 1.4});
      masks.emplace_back(m, PixelSpacing{1.4, 1.4});
    }
    write_nifti(CineStack(3, 2, imgs, 8.0), (dir / "images" / (std::string(name) + ".nii")).string(), type);
    write_nifti(MaskStack(3, 2, masks, 8.0), (dir / "masks" / (std::string(name) + ".nii")).string());
  }
}

/// A disk of the given radius centred in a 32x32 plane, counted directly.
std::int64_t disk(int rad, LabelMask::plane_type* fill)
{
  std::int64_t n = 0;
  for (int r = 0; r < 32; ++r)
    for (int c = 0; c < 32; ++c)
      if ((r - 16) * (r - 16) + (c - 16) * (c - 16) <= rad * rad) {
        ++n;
        if (fill)
          (*fill)(r, c) = 1;
      }
  return n;
}

struct Fixture
{
  Fixture()
  {
    fs::remove_all(kRoot);
    fs::create_directories(kRoot);
    make_dataset(kRoot / "data");
  }
};

}  // namespace

TEST_CASE_FIXTURE(Fixture, "augment: identity config reproduces the input payloads")
{
  write(kRoot / "identity.json",
        R"({"epsilon": 0, "rotation_range": 0, "scale_min": 1, "scale_max": 1, "shear_range": 0,
            "translation_range": 0, "flip_prob_x": 0, "flip_prob_y": 0})");
  const auto data = kRoot / "data";
  REQUIRE(run("augment --images " + (data / "images").string() + " --masks " + (data / "masks").string() +
              " --config " + (kRoot / "identity.json").string() + " --batch-size 4 --workers 2 --out " +
              (kRoot / "id").string()) == 0);
  for (const char* name : {"caseA", "caseB"}) {
    for (const char* kind : {"images", "masks"}) {
      const auto in = slurp(data / kind / (std::string(name) + ".nii"));
      const auto out = slurp(kRoot / "id" / kind / (std::string(name) + "_aug0.nii"));
      REQUIRE(in.size() == out.size());
      CHECK(in.substr(352) == out.substr(352));
    }
  }
  CHECK(fs::exists(kRoot / "id" / "stats.json"));
  CHECK(fs::exists(kRoot / "id" / "specs.csv"));
}

TEST_CASE_FIXTURE(Fixture, "augment: deterministic across runs and worker counts")
{
  const auto data = kRoot / "data";
  const std::string base = "augment --images " + (data / "images").string() + " --masks " +
                           (data / "masks").string() + " --n-per-sample 2 --batch-size 5 ";
  REQUIRE(run(base + "--seed 77 --workers 1 --out " + (kRoot / "w1").string()) == 0);
  REQUIRE(run(base + "--seed 77 --workers 1 --out " + (kRoot / "w1b").string()) == 0);
  REQUIRE(run(base + "--seed 77 --workers 8 --queue-depth 1 --out " + (kRoot / "w8").string()) == 0);
  const auto t1 = tree(kRoot / "w1");
  CHECK(t1.size() == 2 * 2 * 2 + 2);  // images and masks per case per repetition, specs, config
  CHECK(t1 == tree(kRoot / "w1b"));
  CHECK(t1 == tree(kRoot / "w8"));

  REQUIRE(run(base + "--seed 78 --out " + (kRoot / "other").string()) == 0);
  CHECK(tree(kRoot / "other") != t1);
}

TEST_CASE_FIXTURE(Fixture, "augment: errors exit nonzero")
{
  CHECK(run("augment --images " + (kRoot / "nope").string() + " --masks " + (kRoot / "nope").string()) != 0);
  CHECK(slurp(kRoot / "stderr.txt").find("error") != std::string::npos);
  write(kRoot / "bad.json", R"({"epsilon": 0.1, "colour": 3})");
  const auto data = kRoot / "data";
  CHECK(run("augment --images " + (data / "images").string() + " --masks " + (data / "masks").string() +
            " --config " + (kRoot / "bad.json").string() + " --out " + (kRoot / "bad").string()) != 0);
  CHECK(run("frobnicate") != 0);
}

TEST_CASE_FIXTURE(Fixture, "volumes: shrinking cylinder phantom")
{
  const std::vector<int> radii{12, 9, 6, 10};
  std::vector<LabelMask> planes;
  for (int rad : radii)
    for (int s = 0; s < 4; ++s) {
      LabelMask::plane_type p = LabelMask::plane_type::Zero(32, 32);
      disk(rad, &p);
      planes.emplace_back(p, PixelSpacing{1.4, 1.4});
    }
  fs::create_directories(kRoot / "vol");
  write_nifti(MaskStack(4, radii.size(), planes, 8.0), (kRoot / "vol" / "phantom.nii").string());
  write_nifti(MaskStack(1, 2, std::vector<LabelMask>(2, LabelMask::zeros(4, 4)), 8.0),
              (kRoot / "vol" / "empty.nii").string());

  REQUIRE(run("volumes --masks " + (kRoot / "vol").string() + " --gap 8 --out " + (kRoot / "vout").string()) == 0);
  std::istringstream csv(slurp(kRoot / "vout" / "volumes.csv"));
  std::string header, empty_row, phantom_row;
  std::getline(csv, header);
  std::getline(csv, empty_row);
  std::getline(csv, phantom_row);
  CHECK(empty_row.rfind("empty,NA,NA,NA", 0) == 0);

  const auto f = split_csv_line(phantom_row);
  REQUIRE(f.size() == 13);
  // pixdim is float32 on disk; thickness 8 + gap 8
  const double px = static_cast<double>(1.4f);
  const double voxel_ml = px * px * 16.0 / 1000.0;
  CHECK(std::stod(f[1]) == doctest::Approx(4 * disk(6, nullptr) * voxel_ml).epsilon(1e-12));
  CHECK(std::stod(f[2]) == doctest::Approx(4 * disk(12, nullptr) * voxel_ml).epsilon(1e-12));
  const double ef = 100.0 * (1.0 - double(disk(6, nullptr)) / double(disk(12, nullptr)));
  CHECK(std::abs(std::stod(f[3]) - ef) <= 1e-9);
  CHECK(f[11] == "2");
  CHECK(f[12] == "0");
  CHECK(fs::exists(kRoot / "vout" / "volumes.json"));
}

TEST_CASE_FIXTURE(Fixture, "metrics: prediction equal to truth")
{
  const auto masks = (kRoot / "data" / "masks").string();
  REQUIRE(run("metrics --pred " + masks + " --truth " + masks + " --out " + (kRoot / "mout").string()) == 0);
  std::istringstream csv(slurp(kRoot / "mout" / "metrics.csv"));
  std::string line;
  std::getline(csv, line);
  int rows = 0;
  while (std::getline(csv, line)) {
    const auto f = split_csv_line(line);
    CHECK(f[3] == "1");
    CHECK(f[4] == "1");
    ++rows;
  }
  CHECK(rows == 2 * 2 * 4);  // cases x phases x regions
  CHECK(fs::exists(kRoot / "mout" / "metrics_summary.csv"));
}

TEST_CASE_FIXTURE(Fixture, "agree: identical pairs and an exact proportional fit")
{
  write(kRoot / "same.csv", "case_id,truth,pred\na,100,100\nb,150,150\nc,80,80\nd,120,120\n");
  REQUIRE(run("agree --pairs " + (kRoot / "same.csv").string() + " --fit " + (kRoot / "same.csv").string() +
              " --out " + (kRoot / "a1").string()) == 0);
  const auto j1 = slurp(kRoot / "a1" / "agreement.json");
  CHECK(j1.find("\"rho\": 1.0") != std::string::npos);
  CHECK(j1.find("\"slope\": 1.0") != std::string::npos);

  write(kRoot / "double.csv", "case_id,truth,pred\na,200,100\nb,300,150\nc,160,80\n");
  REQUIRE(run("agree --pairs " + (kRoot / "double.csv").string() + " --fit " + (kRoot / "double.csv").string() +
              " --crps --parameter lv_edv --out " + (kRoot / "a2").string()) == 0);
  const auto j2 = slurp(kRoot / "a2" / "agreement.json");
  const auto adjusted = j2.substr(j2.find("\"adjusted\""));
  CHECK(adjusted.find("\"mape\": 0.0") != std::string::npos);
  CHECK(adjusted.find("\"slope\": 2.0") != std::string::npos);
  CHECK(j2.find("\"crps\"") != std::string::npos);
  CHECK(slurp(kRoot / "a2" / "fit_line.csv").rfind("slope,intercept", 0) == 0);
  CHECK(slurp(kRoot / "a2" / "scatter.csv").find("a,200,100,200,") != std::string::npos);
}

TEST_CASE_FIXTURE(Fixture, "crps subcommand")
{
  write(kRoot / "t.csv", "case_id,systolic_ml,diastolic_ml\nc1,12,100\n");
  write(kRoot / "p.csv", "case_id,systolic_ml,diastolic_ml\nc1,10,100\n");
  REQUIRE(run("crps --truth " + (kRoot / "t.csv").string() + " --pred " + (kRoot / "p.csv").string() + " --out " +
              (kRoot / "c").string()) == 0);
  const auto out = slurp(kRoot / "stdout.txt");
  const auto score = std::stod(out.substr(out.find("score,") + 6));
  CHECK(score == doctest::Approx(1.0 / 600.0));
  write(kRoot / "p2.csv", "case_id,systolic_ml,diastolic_ml\nc2,10,100\n");
  CHECK(run("crps --truth " + (kRoot / "t.csv").string() + " --pred " + (kRoot / "p2.csv").string()) != 0);
}

TEST_CASE_FIXTURE(Fixture, "topology subcommand")
{
  REQUIRE(run("topology --recipe-out " + (kRoot / "recipe.json").string()) == 0);
  const auto table = slurp(kRoot / "stdout.txt");
  CHECK(table.find("256x256x5") != std::string::npos);
  CHECK(table.find("16x16x") != std::string::npos);
  CHECK(slurp(kRoot / "recipe.json").find("\"lr_initial\"") != std::string::npos);

  write(kRoot / "bad_topo.json", R"({"input_size": 250})");
  CHECK(run("topology --config " + (kRoot / "bad_topo.json").string()) != 0);
  CHECK(slurp(kRoot / "stdout.txt").empty());
}
