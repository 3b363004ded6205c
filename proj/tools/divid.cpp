// divid: DIRE extraction, dataset building, two-phase detector training, evaluation and sweeps.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <opencv2/core.hpp>

#include "CLI11.hpp"
#include "json.hpp"

#include "divid/cli/run_config.hpp"
#include "divid/data/build.hpp"
#include "divid/eval/evaluate.hpp"
#include "divid/eval/report.hpp"
#include "divid/eval/sweep.hpp"
#include "divid/pipeline.hpp"
#include "divid/toy/dataset.hpp"
#include "divid/toy/predictor.hpp"

namespace {

using namespace divid;
using nlohmann::json;
namespace fs = std::filesystem;

// Documented flags, listed in the top-level help.
const std::vector<std::pair<std::string, std::string>>& documented_flags() {
  static const std::vector<std::pair<std::string, std::string>> f{
      {"--manifest", "dataset manifest (JSON Lines)"},
      {"--output", "output file or directory"},
      {"--diffusion-steps", "schedule length T (a list for sweep)"},
      {"--ddim-steps", "DDIM inversion/reconstruction steps (a list for sweep)"},
      {"--eta", "DDIM stochasticity; extraction requires 0"},
      {"--fusion", "detector input: dire, rgb or dire+rgb"},
      {"--phase", "training phase: cnn or lstm"},
      {"--batch-size", "frames (cnn) or sequences (lstm) per step"},
      {"--seq-len", "LSTM sequence length"},
      {"--seed", "random seed"},
      {"--workers", "extraction and evaluation threads"},
      {"--config", "key = value settings file (flags take precedence)"},
  };
  return f;
}

std::string help_footer() {
  std::string s = "\nFlags (see each subcommand's --help):\n";
  for (const auto& [name, text] : documented_flags()) {
    s += "  " + name + std::string(20 - name.size(), ' ') + text + "\n";
  }
  s += "\nEnvironment:\n  " + std::string(cli::kHomeVariable) + "          artifact root (default ./divid_home)\n";
  s += "\nExit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.\n";
  return s;
}

void log_event(const std::string& event, json fields = json::object()) {
  fields["event"] = event;
  fields["time"] = static_cast<long long>(std::time(nullptr));
  std::cerr << fields.dump() << '\n';
}

// Flags shared by several subcommands; applied over the config file.
struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<int> diffusion_steps;
  std::optional<int> ddim_steps;
  std::optional<double> eta;
  std::optional<std::string> fusion;
  std::optional<std::string> phase;
  std::optional<int> batch_size;
  std::optional<int> seq_len;
  std::optional<int> epochs;
  std::optional<double> lr;
  std::optional<std::string> predictor;
  std::optional<std::string> weights;

  cli::RunConfig resolve() const {
    cli::RunConfig cfg;
    if (!config.empty()) cli::apply_config_file(cfg, config);
    if (seed) cfg.diffusion.seed = *seed;
    if (workers) cfg.workers = *workers;
    if (diffusion_steps) cfg.diffusion.total_steps = *diffusion_steps;
    if (ddim_steps) cfg.diffusion.ddim_steps = *ddim_steps;
    if (eta) cfg.diffusion.eta = *eta;
    if (fusion) cfg.fusion = *fusion;
    if (phase) cfg.phase = *phase;
    if (batch_size) cfg.batch_size = *batch_size;
    if (seq_len) cfg.seq_len = *seq_len;
    if (epochs) cfg.epochs = *epochs;
    if (lr) cfg.lr = *lr;
    if (predictor) cfg.predictor = *predictor;
    if (weights) cfg.locator = *weights;
    cfg.validate();
    return cfg;
  }
};

void add_config(CLI::App* c, CommonFlags& f) { c->add_option("--config", f.config, "key = value settings file"); }
void add_seed(CLI::App* c, CommonFlags& f) { c->add_option("--seed", f.seed, "random seed"); }
void add_workers(CLI::App* c, CommonFlags& f) { c->add_option("--workers", f.workers, "worker threads"); }
void add_diffusion(CLI::App* c, CommonFlags& f) {
  c->add_option("--diffusion-steps", f.diffusion_steps, "schedule length T");
  c->add_option("--ddim-steps", f.ddim_steps, "DDIM steps");
  c->add_option("--eta", f.eta, "DDIM eta");
}
void add_training(CLI::App* c, CommonFlags& f) {
  c->add_option("--fusion", f.fusion, "dire, rgb or dire+rgb")->check(CLI::IsMember({"dire", "rgb", "dire+rgb"}));
  c->add_option("--batch-size", f.batch_size, "frames (cnn) or sequences (lstm) per step");
  c->add_option("--seq-len", f.seq_len, "LSTM sequence length");
  c->add_option("--epochs", f.epochs, "passes over the training split");
  c->add_option("--lr", f.lr, "Adam learning rate");
}
void add_predictor(CLI::App* c, CommonFlags& f) {
  c->add_option("--predictor", f.predictor, "noise predictor: toy, zero or adm");
  c->add_option("--weights", f.weights, "predictor checkpoint (default: <root>/toy_predictor for toy)");
}

// The toy predictor's default checkpoint lives under the artifact root.
void default_locator(cli::RunConfig& cfg) {
  if (cfg.locator.empty() && cfg.predictor == "toy") cfg.locator = (cli::artifact_root() / "toy_predictor").string();
}

fs::path or_default(const std::string& out, const fs::path& fallback) { return out.empty() ? fallback : fs::path(out); }

data::DatasetManifest load_manifest(const std::string& path) {
  if (path.empty()) throw UsageError("--manifest is required");
  return data::read_manifest(path);
}

// ---- subcommands ----

int run_build_manifest(const std::vector<std::string>& roots, const std::string& output, const std::string& frames_root,
                       int clip_length, const CommonFlags& flags) {
  const auto cfg = flags.resolve();
  std::vector<data::ScanRoot> scan;
  for (const auto& r : roots) scan.push_back(data::parse_scan_root(r));
  data::BuildOptions opt;
  opt.manifest_path = or_default(output, cli::artifact_root() / "manifest.jsonl");
  opt.frames_root = frames_root.empty() ? opt.manifest_path.parent_path() / "frames" : fs::path(frames_root);
  opt.clip_length = clip_length;
  opt.seed = cfg.seed();
  if (opt.manifest_path.has_parent_path()) fs::create_directories(opt.manifest_path.parent_path());
  const auto res = data::build_manifest(scan, opt);
  for (const auto& w : res.warnings) log_event("warning", {{"message", w}});
  data::write_manifest(res.manifest, opt.manifest_path);
  log_event("manifest_written", {{"path", opt.manifest_path.string()}, {"clips", res.manifest.entries.size()},
                                 {"counts", res.counts()}});
  return 0;
}

int run_extract(const std::string& manifest_path, const std::string& output, const std::string& split,
                const CommonFlags& flags) {
  auto cfg = flags.resolve();
  default_locator(cfg);
  auto manifest = load_manifest(manifest_path);
  ExtractOptions ex;
  ex.settings = cfg.diffusion;
  ex.predictor = cfg.predictor;
  ex.locator = cfg.locator;
  ex.workers = cfg.workers;
  if (!output.empty()) ex.output_dir = output;
  if (!split.empty()) ex.split = data::parse_split(split);
  const auto start = std::chrono::steady_clock::now();
  const auto rep = extract_dire(manifest, ex);
  data::write_manifest(manifest, manifest_path);
  log_event("dire_extracted",
            {{"clips", rep.clips},
             {"frames", rep.frames},
             {"config_digest", rep.config_digest},
             {"seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()}});
  return 0;
}

int run_train(const std::string& manifest_path, const std::string& output, const std::string& init,
              const CommonFlags& flags) {
  const auto cfg = flags.resolve();
  const auto phase = detector::parse_phase(cfg.phase);
  const auto manifest = load_manifest(manifest_path);
  const fs::path out = or_default(output, cli::artifact_root() / "checkpoints" / (cfg.fusion + "_" + cfg.phase));

  std::optional<detector::DetectorModel> model;
  if (phase == detector::Phase::lstm) {
    if (init.empty()) throw UsageError("train --phase lstm needs --checkpoint pointing at a phase-cnn checkpoint");
    if (!fs::exists(fs::path(init) / "config.json")) {
      throw UsageError("train --phase lstm: no phase-cnn checkpoint at " + init);
    }
    const auto saved = nn::read_checkpoint_config(init);
    if (saved.value("phase", "") != "cnn") throw UsageError(init + " is not a phase-cnn checkpoint");
    model.emplace(detector::DetectorModel::load(init, cfg.seed()));
    if (model->fusion() != detector::parse_fusion(cfg.fusion)) {
      throw UsageError("--fusion " + cfg.fusion + " does not match the checkpoint's " + to_string(model->fusion()));
    }
  } else {
    model.emplace(cfg.detector());
    Rng rng = make_rng(cfg.seed(), 0xde7ec7ULL);
    model->init(rng);
  }
  const int side = model->config().input_size;
  const auto clips = detector::load_split_inputs(manifest, data::Split::train, model->fusion(), {side, side});
  auto tc = cfg.train(phase);
  fs::create_directories(out);
  tc.metrics_log = (out / "metrics.jsonl").string();
  fs::remove(tc.metrics_log);
  const auto res = detector::train(*model, clips, tc);
  for (const auto& w : res.warnings) log_event("warning", {{"message", w}});
  model->save(out, {{"config_digest", cfg.digest()}, {"seed", cfg.seed()}});
  log_event("checkpoint_written", {{"path", out.string()},
                                   {"phase", cfg.phase},
                                   {"steps", res.steps},
                                   {"final_loss", res.final_loss()},
                                   {"config_digest", cfg.digest()}});
  return 0;
}

int run_eval(const std::string& manifest_path, const std::vector<std::string>& checkpoints, const std::string& split_name,
             const std::string& output, const CommonFlags& flags) {
  const auto cfg = flags.resolve();
  if (checkpoints.empty()) throw UsageError("eval needs at least one --checkpoint");
  const auto split = data::parse_split(split_name);
  const auto manifest = load_manifest(manifest_path);
  std::vector<eval::ReportRow> rows;
  json jrows = json::array();
  for (const auto& ck : checkpoints) {
    const auto model = detector::DetectorModel::load(ck);
    auto report = eval::evaluate_split(model, manifest, split, cfg.workers);
    report.config_digest = nn::read_checkpoint_config(ck).value("config_digest", std::string{});
    eval::ReportRow row{eval::input_label(to_string(model.fusion())), model.architecture(), report};
    auto j = eval::to_json(row);
    j["checkpoint"] = ck;
    jrows.push_back(j);
    rows.push_back(std::move(row));
  }
  const bool in_domain = split != data::Split::test_out;
  const std::string table = in_domain ? eval::in_domain_table(rows) : eval::out_domain_table(rows);
  std::cout << table;
  const fs::path out = or_default(output, cli::artifact_root() / "reports" / ("eval_" + split_name + ".json"));
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  json doc{{"split", split_name},
           {"table", in_domain ? "in_domain" : "out_domain"},
           {"config_digest", cfg.digest()},
           {"rows", jrows}};
  std::ofstream(out) << doc.dump(2) << '\n';
  log_event("report_written", {{"path", out.string()}, {"config_digest", cfg.digest()}});
  return 0;
}

int run_sweep(const std::string& manifest_path, const std::vector<int>& steps, const std::vector<int>& ddims,
              const std::string& axis, const std::string& output, bool retrain, const CommonFlags& flags) {
  auto cfg = flags.resolve();
  default_locator(cfg);
  if (steps.empty() || ddims.empty()) throw UsageError("sweep needs --diffusion-steps and --ddim-steps lists");
  const auto manifest = load_manifest(manifest_path);
  eval::SweepOptions opt;
  opt.diffusion_steps = steps;
  opt.ddim_steps = ddims;
  opt.axis = eval::parse_step_axis(axis);
  opt.retrain = retrain;
  opt.work_dir = or_default(output, cli::artifact_root() / "sweep");
  opt.extract.settings = cfg.diffusion;
  opt.extract.predictor = cfg.predictor;
  opt.extract.locator = cfg.locator;
  opt.extract.workers = cfg.workers;
  opt.detector = cfg.detector();
  opt.cnn = cfg.train(detector::Phase::cnn);
  opt.lstm = cfg.train(detector::Phase::lstm);
  opt.train_lstm = detector::parse_phase(cfg.phase) == detector::Phase::lstm;
  fs::create_directories(opt.work_dir);
  const auto grid = eval::step_sweep(manifest, opt);
  const auto csv = eval::sweep_csv(grid);
  std::ofstream(opt.work_dir / "sweep.csv") << csv;
  std::ofstream(opt.work_dir / "sweep.json") << json{{"config_digest", cfg.digest()},
                                                      {"axis", axis},
                                                      {"diffusion_steps", steps},
                                                      {"ddim_steps", ddims}}
                                                    .dump(2)
                                             << '\n';
  std::cout << csv;
  long failed = 0;
  for (const auto& c : grid.cells) failed += !c.ok;
  log_event("sweep_done", {{"cells", grid.cells.size()}, {"failed", failed}, {"config_digest", cfg.digest()}});
  return 0;
}

int run_toy_train(const std::string& output, long steps, int width, const std::string& kind, double max_seconds,
                  const CommonFlags& flags) {
  auto cfg = flags.resolve();
  if (!flags.diffusion_steps && flags.config.empty()) cfg.diffusion.total_steps = 100;
  const fs::path out = or_default(output, cli::artifact_root() / "toy_predictor");
  toy::ToyPredictor p(width);
  Rng rng = make_rng(cfg.seed(), 0x70e1ULL);
  p.net.init(rng);
  toy::ToyTrainBudget budget;
  budget.steps = steps;
  budget.max_seconds = max_seconds;
  const toy::ToyDistribution dist{toy::parse_toy_kind(kind), cfg.seed()};
  const auto r = toy::train_toy_predictor(p, dist, cfg.diffusion.schedule(), budget, cfg.seed());
  p.save(out, {{"config_digest", cfg.digest()}, {"initial_heldout", r.initial_heldout}, {"final_heldout", r.final_heldout}});
  log_event("toy_predictor_written", {{"path", out.string()},
                                      {"steps", r.steps},
                                      {"initial_heldout", r.initial_heldout},
                                      {"final_heldout", r.final_heldout},
                                      {"seconds", r.seconds}});
  return 0;
}

int run_toy_generate(const std::string& output, const toy::ToyDatasetOptions& base, const CommonFlags& flags) {
  auto cfg = flags.resolve();
  default_locator(cfg);
  if (!flags.diffusion_steps && flags.config.empty()) cfg.diffusion.total_steps = 100;
  if (!flags.ddim_steps && flags.config.empty()) cfg.diffusion.ddim_steps = 10;
  const fs::path root = or_default(output, cli::artifact_root() / "toy_data");
  const auto predictor = builtin_registry().create(cfg.predictor, cfg.locator);
  auto opt = base;
  opt.settings = cfg.diffusion;
  opt.settings.eta = 0.0;
  opt.seed = cfg.seed();
  opt.workers = cfg.workers;
  fs::create_directories(root);
  const auto m = toy::generate_toy_dataset(*predictor, root, opt);
  data::write_manifest(m, root / "manifest.jsonl");
  log_event("toy_dataset_written", {{"manifest", (root / "manifest.jsonl").string()},
                                    {"clips", m.entries.size()},
                                    {"counts", m.counts()},
                                    {"config_digest", opt.settings.digest()}});
  return 0;
}

int run(int argc, char** argv) {
  CLI::App app{"divid: detect diffusion-generated video from DIRE sequences"};
  app.footer(help_footer());
  app.require_subcommand(1);
  app.set_version_flag("--version", "divid 0.1.0");

  CommonFlags flags;
  std::string manifest, output, split, init;
  std::vector<std::string> roots, checkpoints;
  std::string frames_root;
  int clip_length = data::kDefaultClipLength;

  auto* build = app.add_subcommand("build-manifest", "scan real/fake roots into a dataset manifest");
  build->add_option("--root", roots, "path:source:label:split (split: train, test_in, test_out or auto:<fraction>)")
      ->required();
  build->add_option("--output", output, "manifest path (default <root>/manifest.jsonl)");
  build->add_option("--frames-root", frames_root, "where cropped video frames are written");
  build->add_option("--clip-length", clip_length, "frames per clip cut from videos");
  add_seed(build, flags);
  add_config(build, flags);

  auto* extract = app.add_subcommand("extract-dire", "compute DIRE maps for every clip and record them in the manifest");
  extract->add_option("--manifest", manifest, "dataset manifest")->required();
  extract->add_option("--output", output, "DIRE directory (default: next to each clip's frames)");
  extract->add_option("--split", split, "only this split");
  add_diffusion(extract, flags);
  add_predictor(extract, flags);
  add_workers(extract, flags);
  add_seed(extract, flags);
  add_config(extract, flags);

  auto* train = app.add_subcommand("train", "train the detector (phase cnn, then phase lstm)");
  train->add_option("--manifest", manifest, "dataset manifest")->required();
  train->add_option("--phase", flags.phase, "cnn or lstm")->check(CLI::IsMember({"cnn", "lstm"}));
  train->add_option("--output", output, "checkpoint directory");
  train->add_option("--checkpoint", init, "phase-cnn checkpoint (required for --phase lstm)");
  add_training(train, flags);
  add_workers(train, flags);
  add_seed(train, flags);
  add_config(train, flags);

  auto* ev = app.add_subcommand("eval", "score a split and print the in-domain or out-domain table");
  std::string eval_split = "test_in";
  ev->add_option("--manifest", manifest, "dataset manifest")->required();
  ev->add_option("--checkpoint", checkpoints, "detector checkpoint (repeatable, one table row each)")->required();
  ev->add_option("--split", eval_split, "test_in or test_out")->check(CLI::IsMember({"train", "test_in", "test_out"}));
  ev->add_option("--output", output, "report JSON path");
  add_workers(ev, flags);
  add_seed(ev, flags);
  add_config(ev, flags);

  auto* sweep = app.add_subcommand("sweep", "extract, train and evaluate over a diffusion-steps x ddim-steps grid");
  std::vector<int> sweep_steps, sweep_ddim;
  std::string axis = "schedule_length";
  bool retrain = true;
  sweep->add_option("--manifest", manifest, "dataset manifest")->required();
  sweep->add_option("--diffusion-steps", sweep_steps, "list of diffusion-step values")->required()->delimiter(',');
  sweep->add_option("--ddim-steps", sweep_ddim, "list of DDIM-step values")->required()->delimiter(',');
  sweep->add_option("--eta", flags.eta, "DDIM eta");
  sweep->add_option("--axis", axis, "schedule_length or inversion_depth")
      ->check(CLI::IsMember({"schedule_length", "inversion_depth"}));
  sweep->add_option("--phase", flags.phase, "last training phase per cell: cnn or lstm")
      ->check(CLI::IsMember({"cnn", "lstm"}));
  sweep->add_flag("!--no-retrain", retrain, "train once on the first cell and reuse the detector");
  sweep->add_option("--output", output, "sweep directory");
  add_training(sweep, flags);
  add_predictor(sweep, flags);
  add_workers(sweep, flags);
  add_seed(sweep, flags);
  add_config(sweep, flags);

  auto* toy_cmd = app.add_subcommand("toy", "desk-scale toy predictor and datasets");
  toy_cmd->require_subcommand(1);
  auto* toy_train = toy_cmd->add_subcommand("train-predictor", "train the 16x16 toy noise predictor");
  long toy_steps = 1500;
  int toy_width = 32;
  std::string toy_kind = "band_limited";
  double toy_seconds = 600.0;
  toy_train->add_option("--output", output, "checkpoint directory (default <root>/toy_predictor)");
  toy_train->add_option("--steps", toy_steps, "optimiser steps");
  toy_train->add_option("--width", toy_width, "channel width");
  toy_train->add_option("--kind", toy_kind, "band_limited or grating");
  toy_train->add_option("--max-seconds", toy_seconds, "wall-clock budget");
  toy_train->add_option("--diffusion-steps", flags.diffusion_steps, "schedule length T (<= 200, default 100)");
  add_seed(toy_train, flags);
  add_config(toy_train, flags);

  auto* toy_gen = toy_cmd->add_subcommand("generate", "write a toy real/fake dataset and its manifest");
  toy::ToyDatasetOptions gen;
  toy_gen->add_option("--output", output, "dataset directory (default <root>/toy_data)");
  toy_gen->add_option("--clips", gen.train_clips, "training clips");
  toy_gen->add_option("--test-clips", gen.test_clips, "in-domain test clips");
  toy_gen->add_option("--out-clips", gen.out_clips_per_source, "out-domain clips per generator");
  toy_gen->add_option("--clip-length", gen.clip_length, "frames per clip");
  toy_gen->add_option("--diffusion-steps", flags.diffusion_steps, "schedule length T (default 100)");
  toy_gen->add_option("--ddim-steps", flags.ddim_steps, "sampling steps for fake frames (default 10)");
  add_predictor(toy_gen, flags);
  add_workers(toy_gen, flags);
  add_seed(toy_gen, flags);
  add_config(toy_gen, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_code_for(ErrorKind::usage);
  }

  if (*build) return run_build_manifest(roots, output, frames_root, clip_length, flags);
  if (*extract) return run_extract(manifest, output, split, flags);
  if (*train) return run_train(manifest, output, init, flags);
  if (*ev) return run_eval(manifest, checkpoints, eval_split, output, flags);
  if (*sweep) return run_sweep(manifest, sweep_steps, sweep_ddim, axis, output, retrain, flags);
  if (*toy_train) return run_toy_train(output, toy_steps, toy_width, toy_kind, toy_seconds, flags);
  if (*toy_gen) return run_toy_generate(output, gen, flags);
  return exit_code_for(ErrorKind::usage);
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const divid::Error& e) {
    log_event("error", {{"kind", divid::to_string(e.kind())}, {"message", e.what()}});
    return divid::exit_code_for(e.kind());
  } catch (const cv::Exception& e) {
    log_event("error", {{"kind", "data"}, {"message", e.what()}});
    return divid::exit_code_for(divid::ErrorKind::data);
  } catch (const nlohmann::json::exception& e) {
    log_event("error", {{"kind", "data"}, {"message", e.what()}});
    return divid::exit_code_for(divid::ErrorKind::data);
  } catch (const std::filesystem::filesystem_error& e) {
    log_event("error", {{"kind", "data"}, {"message", e.what()}});
    return divid::exit_code_for(divid::ErrorKind::data);
  } catch (const std::exception& e) {
    log_event("error", {{"kind", "internal"}, {"message", e.what()}});
    return 1;
  }
}
