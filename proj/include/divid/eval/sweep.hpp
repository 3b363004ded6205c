#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "divid/core/error.hpp"
#include "divid/core/random.hpp"
#include "divid/detector/dataset.hpp"
#include "divid/detector/model.hpp"
#include "divid/detector/train.hpp"
#include "divid/eval/evaluate.hpp"
#include "divid/eval/report.hpp"
#include "divid/pipeline.hpp"

namespace divid::eval {

// What the "diffusion steps" axis varies: the schedule length T, or the top inversion timestep on a
// fixed schedule whose length is the largest axis value.
enum class StepAxis { schedule_length, inversion_depth };

inline std::string to_string(StepAxis a) { return a == StepAxis::schedule_length ? "schedule_length" : "inversion_depth"; }

inline StepAxis parse_step_axis(const std::string& s) {
  if (s == "schedule_length") return StepAxis::schedule_length;
  if (s == "inversion_depth") return StepAxis::inversion_depth;
  throw UsageError("unknown step axis '" + s + "' (expected schedule_length or inversion_depth)");
}

struct SweepOptions {
  std::vector<int> diffusion_steps;
  std::vector<int> ddim_steps;
  StepAxis axis = StepAxis::schedule_length;
  bool retrain = true;  // false: train once on the first cell and reuse the detector
  std::filesystem::path work_dir;
  int max_cells = 64;
  ExtractOptions extract;
  detector::DetectorConfig detector;
  detector::TrainConfig cnn;
  detector::TrainConfig lstm;
  bool train_lstm = true;
  data::Split train_split = data::Split::train;
  data::Split eval_split = data::Split::test_in;
};

struct SweepCell {
  int diffusion_steps = 0;
  int ddim_steps = 0;
  bool ok = false;
  std::string error;
  MetricsReport report;
};

struct SweepGrid {
  std::vector<int> diffusion_steps;
  std::vector<int> ddim_steps;
  StepAxis axis = StepAxis::schedule_length;
  std::vector<SweepCell> cells;  // row-major: diffusion steps outer, ddim steps inner
};

// Settings of one grid cell.
inline diffusion::DiffusionSettings cell_settings(const SweepOptions& opt, int steps, int ddim) {
  auto s = opt.extract.settings;
  s.ddim_steps = ddim;
  if (opt.axis == StepAxis::schedule_length) {
    s.total_steps = steps;
    s.depth = 0;
  } else {
    s.total_steps = *std::max_element(opt.diffusion_steps.begin(), opt.diffusion_steps.end());
    s.depth = steps;
  }
  return s;
}

inline detector::DetectorModel train_detector(const SweepOptions& opt, const data::DatasetManifest& manifest) {
  const int side = opt.detector.input_size;
  const auto train = detector::load_split_inputs(manifest, opt.train_split, opt.detector.fusion, {side, side});
  detector::DetectorModel model(opt.detector);
  Rng rng = make_rng(opt.cnn.seed, 0xde7ec7ULL);
  model.init(rng);
  detector::train_cnn_phase(model, train, opt.cnn);
  if (opt.train_lstm) detector::train_lstm_phase(model, train, opt.lstm);
  return model;
}

// extract -> (re)train -> evaluate for every cell. A failing cell is recorded and the sweep goes on.
inline SweepGrid step_sweep(const data::DatasetManifest& manifest, const SweepOptions& opt) {
  if (opt.diffusion_steps.empty() || opt.ddim_steps.empty()) throw UsageError("sweep axes must be non-empty");
  const auto cells = opt.diffusion_steps.size() * opt.ddim_steps.size();
  if (static_cast<long>(cells) > opt.max_cells) {
    throw UsageError("sweep has " + std::to_string(cells) + " cells, above the budget of " +
                     std::to_string(opt.max_cells));
  }
  SweepGrid grid{opt.diffusion_steps, opt.ddim_steps, opt.axis, {}};
  std::optional<detector::DetectorModel> shared;
  for (int steps : opt.diffusion_steps) {
    for (int ddim : opt.ddim_steps) {
      SweepCell cell{steps, ddim, false, {}, {}};
      try {
        const auto settings = cell_settings(opt, steps, ddim);
        const auto dir = opt.work_dir / ("cell_" + std::to_string(steps) + "_" + std::to_string(ddim));
        data::DatasetManifest m = manifest;
        ExtractOptions ex = opt.extract;
        ex.settings = settings;
        ex.output_dir = dir / "dire";
        ex.split.reset();
        extract_dire(m, ex);
        if (opt.retrain || !shared) shared = train_detector(opt, m);
        cell.report = evaluate_split(*shared, m, opt.eval_split, opt.extract.workers);
        cell.report.config_digest = settings.digest();
        cell.ok = true;
        std::ofstream(dir / "report.json") << to_json(cell.report).dump(2) << '\n';
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
      grid.cells.push_back(std::move(cell));
    }
  }
  return grid;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

inline std::string sweep_csv(const SweepGrid& grid) {
  std::ostringstream os;
  os << "diffusion_steps,ddim_steps,axis,status,accuracy,average_precision,total_average,n_frames,error\n";
  for (const auto& c : grid.cells) {
    os << c.diffusion_steps << ',' << c.ddim_steps << ',' << to_string(grid.axis) << ',' << (c.ok ? "ok" : "failed")
       << ',';
    if (c.ok) {
      os << fmt2(c.report.accuracy) << ',' << fmt2(c.report.average_precision) << ','
         << fmt2(c.report.total_average) << ',' << c.report.n_frames;
    } else {
      os << ",,,";
    }
    os << ',' << csv_field(c.error) << '\n';
  }
  return os.str();
}

}  // namespace divid::eval
