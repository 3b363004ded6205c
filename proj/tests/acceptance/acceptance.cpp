// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "json.hpp"

#include "divid/core/random.hpp"
#include "divid/data/manifest.hpp"
#include "divid/data/tensor_io.hpp"
#include "divid/detector/lstm.hpp"
#include "divid/detector/train.hpp"
#include "divid/diffusion/predictor.hpp"
#include "divid/diffusion/sampler.hpp"
#include "divid/dire/dire.hpp"
#include "divid/eval/evaluate.hpp"
#include "divid/eval/metrics.hpp"
#include "divid/eval/report.hpp"
#include "divid/eval/stats.hpp"
#include "divid/toy/clips.hpp"
#include "divid/toy/predictor.hpp"

using namespace divid;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using DTensor = BasicTensor<double>;

std::string num(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path scratch(const std::string& tag) {
  const auto p = fs::temp_directory_path() / ("divid-accept-" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// ---- 1. DDPM and DDIM(eta = 1) agree on consecutive timesteps ----

Outcome ddpm_ddim_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng = make_rng(101);
  std::uniform_int_distribution<int> pick_T(2, 1000);
  std::uniform_real_distribution<double> coef(-2.0, 2.0);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int T = pick_T(rng);
    const auto schedule = diffusion::default_schedule(T);
    const int t = std::uniform_int_distribution<int>(1, T)(rng);
    const double a = coef(rng), b = coef(rng), c = coef(rng);
    diffusion::FunctionPredictor<double> pred([a, b, c](const DTensor& x, diffusion::TimeIndex ti) {
      DTensor out(x.shape());
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = a * std::tanh(b * x[i]) + c * ti.fraction();
      return out;
    });
    const DTensor x = gaussian_tensor<double>({4, 4, 3}, rng);
    const DTensor e = gaussian_tensor<double>({4, 4, 3}, rng);
    const double sigma = diffusion::ddim_sigma(schedule, t, t - 1, 1.0);
    const auto via_ddim = diffusion::ddim_step(diffusion::BasicLatentState<double>{x, t}, t - 1, pred, schedule, sigma, &e);
    const auto via_ddpm = diffusion::ddpm_reverse_step(diffusion::BasicLatentState<double>{x, t}, pred, schedule, e);
    if (via_ddim.t != via_ddpm.t) return {false, "timestep mismatch at trial " + std::to_string(trial)};
    worst = std::max(worst, max_abs_diff(via_ddim.values, via_ddpm.values));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-5 && secs < 60.0, "max |diff| " + num(worst) + " over 1000 triples, " + num(secs) + " s"};
}

// ---- 2. deterministic reconstruction across repeats and worker counts ----

Outcome deterministic_sampling() {
  toy::ToyPredictor p(16);
  Rng rng = make_rng(202);
  p.net.init(rng);
  const auto schedule = diffusion::default_schedule(100);
  diffusion::SamplerConfig cfg;
  cfg.ddim_steps = 10;
  const toy::ToyDistribution dist{toy::ToyKind::band_limited, 4};
  std::vector<dire::FrameTensor> frames;
  for (int i = 0; i < 8; ++i) frames.push_back(dire::FrameTensor{dist.sample(i), 16, 16, i});

  double worst = 0.0;
  const auto x0 = frames.front().pixels;
  const auto r1 = diffusion::reconstruct(diffusion::invert(x0, p, schedule, cfg), p, schedule, cfg);
  for (int rep = 0; rep < 3; ++rep) {
    const auto r2 = diffusion::reconstruct(diffusion::invert(x0, p, schedule, cfg), p, schedule, cfg);
    worst = std::max(worst, max_abs_diff(r1, r2));
  }
  const auto base = dire::compute_clip_dire("c", frames, p, schedule, cfg, 1);
  for (int workers : {1, 2, 4}) {
    const auto other = dire::compute_clip_dire("c", frames, p, schedule, cfg, workers);
    for (std::size_t i = 0; i < frames.size(); ++i)
      worst = std::max(worst, max_abs_diff(base.maps[i].values, other.maps[i].values));
  }
  return {worst <= 1e-6, "max |diff| " + num(worst) + " over 3 repeats and 1/2/4 workers"};
}

// ---- 3. forward-process moments ----

Outcome forward_statistics() {
  const auto schedule = diffusion::default_schedule(1000);
  const std::size_t n = 10000;
  const double x0 = 0.6;
  std::string detail;
  bool ok = true;
  for (int t : {1, 100, 500, 1000}) {
    Rng rng = make_rng(303, static_cast<std::uint64_t>(t));
    const DTensor eps = gaussian_tensor<double>({n}, rng);
    DTensor x(Shape{n});
    for (auto& v : x) v = x0;
    const auto xt = diffusion::forward_diffuse(x, t, eps, schedule).values;
    double mean = 0.0;
    for (double v : xt) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : xt) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n - 1);
    const double ab = schedule.alpha_bar(t);
    const double se_mean = std::sqrt((1 - ab) / static_cast<double>(n));
    const double se_var = (1 - ab) * std::sqrt(2.0 / static_cast<double>(n - 1));
    const double zm = std::abs(mean - std::sqrt(ab) * x0) / se_mean;
    const double zv = std::abs(var - (1 - ab)) / se_var;
    ok = ok && zm < 3.0 && zv < 3.0;
    detail += "t=" + std::to_string(t) + " z_mean " + num(zm) + " z_var " + num(zv) + "; ";
  }
  return {ok, detail + "10000 draws each"};
}

// ---- 4. DIRE identity and range ----

Outcome dire_identity_and_bound() {
  const auto schedule = diffusion::default_schedule(1000);
  diffusion::SamplerConfig cfg;
  cfg.ddim_steps = 20;
  double identity = 0.0;
  for (std::uint64_t k = 0; k < 10; ++k) {
    Rng rng = make_rng(404, k);
    const auto x = uniform_tensor<double>({8, 8, 3}, rng, -1.0, 1.0);
    for (double v : dire::dire_values(x, diffusion::ZeroPredictor<double>(), schedule, cfg)) identity = std::max(identity, v);
  }
  const auto short_schedule = diffusion::default_schedule(100);
  diffusion::SamplerConfig c10;
  c10.ddim_steps = 10;
  double lo = 1e9, hi = -1e9;
  for (std::uint64_t k = 0; k < 20; ++k) {
    Rng rng = make_rng(405, k);
    const double scale = 1.0 + 10.0 * static_cast<double>(k);
    diffusion::FunctionPredictor<float> pred([scale](const Tensor& x, diffusion::TimeIndex) {
      Tensor out(x.shape());
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = static_cast<float>(scale * std::sin(3.0 * x[i] + i));
      return out;
    });
    const dire::FrameTensor f{uniform_tensor<float>({8, 8, 3}, rng, -1.0, 1.0), 8, 8, 0};
    for (float v : dire::compute_dire(f, pred, short_schedule, c10).values) {
      lo = std::min<double>(lo, v);
      hi = std::max<double>(hi, v);
    }
  }
  return {identity <= 1e-9 && lo >= 0.0 && hi <= 2.0,
          "zero-predictor max DIRE " + num(identity) + ", random range [" + num(lo) + ", " + num(hi) + "]"};
}

// ---- 5. generated frames reconstruct better than out-of-distribution frames ----

Outcome dire_separation() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto schedule = diffusion::default_schedule(100);
  const toy::ToyDistribution in{toy::ToyKind::band_limited, 1};
  const toy::ToyDistribution out{toy::ToyKind::grating, 2};
  toy::ToyPredictor p(32);
  Rng rng = make_rng(7);
  p.net.init(rng);
  const auto trained = toy::train_toy_predictor(p, in, schedule, toy::ToyTrainBudget{}, 3);
  std::string detail = "heldout " + num(trained.initial_heldout) + " -> " + num(trained.final_heldout) + "; ";
  bool ok = true;
  for (int ddim : {10, 20}) {
    toy::ToyClipOptions o;
    o.clip_length = 1;
    o.sampler.ddim_steps = ddim;
    o.seed = 5;
    diffusion::SamplerConfig cfg;
    cfg.ddim_steps = ddim;
    std::vector<double> fake, ood;
    for (int i = 0; i < 100; ++i) {
      const auto clip = toy::make_fake_clip(p, schedule, static_cast<std::uint64_t>(i), o);
      fake.push_back(mean_of(dire::dire_values(clip.frames[0], p, schedule, cfg)));
      ood.push_back(mean_of(dire::dire_values(out.sample(static_cast<std::uint64_t>(i)), p, schedule, cfg)));
    }
    const auto rt = eval::mann_whitney_less(fake, ood);
    const double mf = std::accumulate(fake.begin(), fake.end(), 0.0) / 100.0;
    const double mo = std::accumulate(ood.begin(), ood.end(), 0.0) / 100.0;
    ok = ok && mf < mo && rt.p_less < 0.01;
    detail += "ddim " + std::to_string(ddim) + ": fake " + num(mf) + " vs ood " + num(mo) + ", p " + num(rt.p_less) + "; ";
  }
  const double secs = seconds_since(t0);
  return {ok && secs < 600.0, detail + num(secs) + " s"};
}

// ---- 6. LSTM cell against a scalar reference, and its gradients ----

double sig(double z) { return 1.0 / (1.0 + std::exp(-z)); }

template <typename T>
void randomize(detector::LstmWeights<T>& W, Rng& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto* p : W.params())
    for (auto& v : p->value) v = static_cast<T>(u(rng));
}

Outcome lstm_correctness() {
  using detector::RowMat;
  Rng rng = make_rng(606);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  double worst_ref = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int H = 1 + trial % 6, F = 1 + (trial / 6) % 7;
    detector::LstmWeights<double> W(F, H);
    randomize(W, rng, 0.8);
    RowMat<double> a(1, H), c(1, H), x(1, F);
    for (int i = 0; i < H; ++i) a(0, i) = u(rng), c(0, i) = u(rng);
    for (int i = 0; i < F; ++i) x(0, i) = u(rng);
    const auto got = detector::lstm_cell_step(detector::LstmState<double>{a, c}, x, W);
    auto at = [](const nn::Param<double>& p, int r, int col, int cols) { return p.value[r * cols + col]; };
    for (int i = 0; i < H; ++i) {
      double zc = 0, zf = W.forget_b.value[i], zu = W.update_b.value[i], zo = W.output_b.value[i];
      for (int j = 0; j < H; ++j) {
        zc += at(W.cand_a, i, j, H) * a(0, j);
        zf += at(W.forget_a, i, j, H) * a(0, j);
        zu += at(W.update_a, i, j, H) * a(0, j);
        zo += at(W.output_a, i, j, H) * a(0, j);
      }
      for (int j = 0; j < F; ++j) {
        zc += at(W.cand_x, i, j, F) * x(0, j);
        zf += at(W.forget_x, i, j, F) * x(0, j);
        zu += at(W.update_x, i, j, F) * x(0, j);
        zo += at(W.output_x, i, j, F) * x(0, j);
      }
      const double cn = sig(zf) * c(0, i) + sig(zu) * std::tanh(zc);
      const double an = sig(zo) * std::tanh(cn);
      worst_ref = std::max({worst_ref, std::abs(got.c(0, i) - cn), std::abs(got.a(0, i) - an)});
    }
  }

  // 2-frame, 8-dimensional cell; loss = sum_t <r_t, a_t>.
  const int H = 8, F = 8;
  detector::LstmWeights<double> W(F, H);
  randomize(W, rng, 0.5);
  std::vector<RowMat<double>> xs, rs;
  for (int t = 0; t < 2; ++t) {
    RowMat<double> x(2, F), r(2, H);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
    for (Eigen::Index i = 0; i < r.size(); ++i) r.data()[i] = u(rng);
    xs.push_back(x);
    rs.push_back(r);
  }
  auto loss = [&] {
    auto s = detector::LstmState<double>::zeros(2, H);
    double l = 0.0;
    for (int t = 0; t < 2; ++t) {
      s = detector::lstm_cell_step(s, xs[t], W);
      l += (s.a.array() * rs[t].array()).sum();
    }
    return l;
  };
  for (auto* p : W.params()) p->zero_grad();
  std::vector<detector::LstmStepCache<double>> cache(2);
  auto s = detector::LstmState<double>::zeros(2, H);
  for (int t = 0; t < 2; ++t) s = detector::lstm_cell_step(s, xs[t], W, &cache[t]);
  RowMat<double> da = RowMat<double>::Zero(2, H), dc = RowMat<double>::Zero(2, H);
  for (int t = 1; t >= 0; --t) {
    auto g = detector::lstm_cell_backward<double>(rs[t] + da, dc, cache[t], W);
    da = g.da_prev;
    dc = g.dc_prev;
  }
  const double h = 1e-6;
  double worst_fd = 0.0;
  for (auto* p : W.params()) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double keep = p->value[i];
      p->value[i] = keep + h;
      const double up = loss();
      p->value[i] = keep - h;
      const double down = loss();
      p->value[i] = keep;
      const double fd = (up - down) / (2 * h);
      worst_fd = std::max(worst_fd, std::abs(fd - p->grad[i]) / std::max(1e-8, std::abs(fd) + std::abs(p->grad[i])));
    }
  }
  return {worst_ref <= 1e-6 && worst_fd < 1e-4,
          "reference max |diff| " + num(worst_ref) + " over 1000 cases, gradient max rel err " + num(worst_fd)};
}

// ---- 7. two-phase training on the synthetic DIRE sets ----

Outcome two_phase_training() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto dir = scratch("phase");
  detector::DetectorConfig cfg;
  cfg.backbone = detector::BackboneConfig{3, 8, 16, 32};
  cfg.hidden_size = 32;
  cfg.input_size = 16;
  detector::DetectorModel model(cfg);
  Rng rng = make_rng(1);
  model.init(rng);

  const auto separable = toy::dire_clip_inputs(toy::make_separable_dire_set(32, 8, 1));
  detector::TrainConfig cnn;
  cnn.batch_size = 32;
  cnn.epochs = 4;
  cnn.adam.lr = 3e-3;
  detector::train_cnn_phase(model, separable, cnn);
  const double acc1 = eval::evaluate_clips(model, separable).accuracy;
  model.save(dir / "cnn");

  auto seq = detector::DetectorModel::load(dir / "cnn", 1);
  const auto train = toy::dire_clip_inputs(toy::make_temporal_dire_set(64, 8, 2));
  const auto heldout = toy::dire_clip_inputs(toy::make_temporal_dire_set(32, 8, 3));
  detector::TrainConfig lstm;
  lstm.phase = detector::Phase::lstm;
  lstm.batch_size = 32;
  lstm.epochs = 40;
  lstm.adam.lr = 1e-2;
  detector::train_lstm_phase(seq, train, lstm);
  const double acc2 = eval::evaluate_clips(seq, heldout).accuracy;

  auto saved = detector::DetectorModel::load(dir / "cnn");
  const auto before = saved.backbone.params();
  const auto after = seq.backbone.params();
  bool identical = before.size() == after.size();
  for (std::size_t i = 0; identical && i < before.size(); ++i)
    identical = before[i]->value.size() == after[i]->value.size() &&
                std::equal(before[i]->value.begin(), before[i]->value.end(), after[i]->value.begin());
  fs::remove_all(dir);
  const double secs = seconds_since(t0);
  return {acc1 >= 95.0 && acc2 >= 90.0 && identical && secs < 1800.0,
          "phase cnn train acc " + num(acc1) + ", phase lstm held-out acc " + num(acc2) + ", backbone " +
              (identical ? "bit-identical" : "CHANGED") + ", " + num(secs) + " s"};
}

// ---- 8. average precision against precision-recall enumeration ----

double enumerated_ap(const std::vector<double>& s, const std::vector<int>& l) {
  const std::size_t n = s.size();
  std::vector<std::size_t> rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t ahead = 0;
    for (std::size_t j = 0; j < n; ++j) ahead += s[j] > s[i] || (s[j] == s[i] && j < i);
    rank[i] = ahead + 1;
  }
  double pos = 0;
  for (int v : l) pos += v;
  double prev = 0.0, ap = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    double tp = 0;
    for (std::size_t i = 0; i < n; ++i) tp += rank[i] <= k && l[i];
    ap += (tp / pos - prev) * tp / static_cast<double>(k);
    prev = tp / pos;
  }
  return 100.0 * ap;
}

Outcome ap_oracle() {
  Rng rng = make_rng(808);
  std::uniform_int_distribution<int> len(1, 20), coarse(0, 3), bit(0, 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto n = static_cast<std::size_t>(len(rng));
    std::vector<double> s(n);
    std::vector<int> l(n);
    for (auto& v : s) v = trial % 3 == 0 ? coarse(rng) / 3.0 : u(rng);
    for (auto& v : l) v = bit(rng);
    l[static_cast<std::size_t>(trial) % n] = 1;
    worst = std::max(worst, std::abs(eval::average_precision(s, l) - enumerated_ap(s, l)));
  }
  const double acc = eval::accuracy({1, 0, 1}, {1, 1, 1});
  return {worst <= 1e-9 && std::abs(acc - 66.667) < 1e-3,
          "max |AP diff| " + num(worst) + " over 1000 inputs, accuracy " + num(acc)};
}

// ---- 9. CLI reports on toy data ----

// Numeric cells become "#.##"; the table is then re-rendered so column widths depend on labels only.
std::string mask_table(const std::string& table) {
  static const std::regex numeric(R"(^-?[0-9]+\.[0-9]+$)");
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(table);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (!header && line.find_first_not_of("-+") == std::string::npos) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const auto bar = line.find('|', start);
      std::string cell = line.substr(start, bar == std::string::npos ? std::string::npos : bar - start);
      const auto a = cell.find_first_not_of(' ');
      const auto b = cell.find_last_not_of(' ');
      cell = a == std::string::npos ? "" : cell.substr(a, b - a + 1);
      cells.push_back(std::regex_match(cell, numeric) ? "#.##" : cell);
      if (bar == std::string::npos) break;
      start = bar + 1;
    }
    rows.push_back(cells);
    header = false;
  }
  return rows.empty() ? std::string{} : eval::render_table(rows);
}

struct Shell {
  fs::path dir;
  int calls = 0;

  // Runs the CLI; returns the exit code and fills stdout.
  int run(const std::string& args, std::string* out = nullptr) {
    const auto so = dir / ("out_" + std::to_string(calls) + ".txt");
    const auto se = dir / ("err_" + std::to_string(calls) + ".txt");
    ++calls;
    const std::string cmd = std::string("\"") + DIVID_CLI_PATH + "\" " + args + " >\"" + so.string() + "\" 2>\"" +
                            se.string() + "\"";
    const int raw = std::system(cmd.c_str());
    const int code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    if (out) *out = slurp(so);
    if (code != 0) std::cerr << "divid " << args << " -> " << code << "\n" << slurp(se);
    return code;
  }
};

Outcome cli_reports() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto root = scratch("cli");
  setenv("DIVID_HOME", (root / "home").c_str(), 1);
  Shell sh{root};
  {
    std::ofstream cfg(root / "toy.cfg");
    cfg << "total_steps = 100\nddim_steps = 10\nseed = 11\nfeature_dim = 32\nhidden_size = 32\nstem_width = 8\n"
           "stage_width = 16\ninput_size = 16\nbatch_size = 32\nseq_len = 4\nepochs = 5\nlr = 0.003\n";
  }
  const std::string conf = " --config \"" + (root / "toy.cfg").string() + "\"";
  const std::string manifest = " --manifest \"" + (root / "home" / "toy_data" / "manifest.jsonl").string() + "\"";
  const std::string cnn = (root / "ck_cnn").string(), lstm = (root / "ck_lstm").string();
  std::vector<std::string> problems;
  auto need = [&](bool ok, const std::string& what) {
    if (!ok) problems.push_back(what);
    return ok;
  };

  if (!need(sh.run("toy train-predictor --steps 300 --width 16" + conf) == 0, "toy train-predictor") ||
      !need(sh.run("toy generate --clips 16 --test-clips 8 --out-clips 4 --clip-length 4" + conf) == 0, "toy generate") ||
      !need(sh.run("extract-dire" + manifest + conf) == 0, "extract-dire") ||
      !need(sh.run("train --phase cnn --output \"" + cnn + "\"" + manifest + conf) == 0, "train cnn") ||
      !need(sh.run("train --phase lstm --checkpoint \"" + cnn + "\" --output \"" + lstm + "\"" + manifest + conf) == 0,
            "train lstm")) {
    return {false, "pipeline failed at: " + problems.front()};
  }

  const std::string both = " --checkpoint \"" + cnn + "\" --checkpoint \"" + lstm + "\"";
  std::string t1, t1b, t2;
  const auto r1 = root / "eval_in.json", r1b = root / "eval_in_again.json", r2 = root / "eval_out.json";
  need(sh.run("eval --split test_in" + both + " --output \"" + r1.string() + "\"" + manifest + conf, &t1) == 0,
       "eval test_in");
  need(sh.run("eval --split test_in" + both + " --output \"" + r1b.string() + "\"" + manifest + conf, &t1b) == 0,
       "eval test_in repeat");
  need(sh.run("eval --split test_out --checkpoint \"" + lstm + "\" --output \"" + r2.string() + "\"" + manifest + conf,
              &t2) == 0,
       "eval test_out");
  const std::string golden = DIVID_TEST_DATA;
  need(mask_table(t1) == slurp(golden + "/table_in_domain.txt"), "in-domain table differs from golden:\n" + t1);
  need(mask_table(t2) == slurp(golden + "/table_out_domain.txt"), "out-domain table differs from golden:\n" + t2);
  need(t1 == t1b, "repeated eval printed a different table");

  double drift = 0.0;
  try {
    const auto a = json::parse(slurp(r1)), b = json::parse(slurp(r1b));
    need(a.at("config_digest").get<std::string>().size() == 16, "report config_digest missing");
    for (std::size_t i = 0; i < a.at("rows").size(); ++i) {
      const auto& ra = a["rows"][i].at("metrics");
      const auto& rb = b["rows"][i].at("metrics");
      need(!ra.at("config_digest").get<std::string>().empty(), "row config_digest missing");
      for (const char* k : {"accuracy", "average_precision"})
        drift = std::max(drift, std::abs(ra.at(k).get<double>() - rb.at(k).get<double>()));
    }
    const auto ck = json::parse(slurp(fs::path(lstm) / "config.json"));
    need(ck.value("config_digest", "").size() == 16, "checkpoint config_digest missing");
  } catch (const std::exception& e) {
    need(false, std::string("report JSON: ") + e.what());
  }
  need(drift <= 1e-6, "eval not reproducible: drift " + num(drift));

  std::string csv;
  const auto sweep_dir = root / "sweep";
  need(sh.run("sweep --diffusion-steps 100,200 --ddim-steps 5,10 --epochs 2 --output \"" + sweep_dir.string() + "\"" +
                  manifest + conf,
              &csv) == 0,
       "sweep");
  std::vector<std::string> cells;
  {
    std::istringstream in(slurp(sweep_dir / "sweep.csv"));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      std::size_t cut = 0;
      for (int k = 0; k < 4 && cut != std::string::npos; ++k) cut = line.find(',', cut + (k > 0));
      cells.push_back(line.substr(0, cut));
    }
  }
  const std::vector<std::string> expect{"100,5,schedule_length,ok", "100,10,schedule_length,ok",
                                        "200,5,schedule_length,ok", "200,10,schedule_length,ok"};
  need(cells == expect, "sweep grid is not 4 row-major ok cells:\n" + slurp(sweep_dir / "sweep.csv"));
  try {
    need(json::parse(slurp(sweep_dir / "sweep.json")).at("config_digest").get<std::string>().size() == 16,
         "sweep config_digest missing");
  } catch (const std::exception& e) {
    need(false, std::string("sweep JSON: ") + e.what());
  }
  const double secs = seconds_since(t0);
  need(secs < 300.0, "runtime " + num(secs) + " s exceeds 300 s");
  if (problems.empty()) fs::remove_all(root);
  std::string detail = problems.empty() ? "tables match golden skeletons, eval drift " + num(drift) +
                                              ", 2x2 sweep ok, digests present, " + num(secs) + " s"
                                        : problems.front();
  for (std::size_t i = 1; i < problems.size(); ++i) detail += "; " + problems[i];
  return {problems.empty(), detail};
}

// ---- 10. persistence round trips ----

Outcome persistence() {
  const auto dir = scratch("persist");
  std::vector<std::string> problems;

  data::DatasetManifest m;
  for (int i = 0; i < 6; ++i) {
    data::ClipRecord r;
    r.clip_id = "clip \"" + std::to_string(i) + "\" \xc3\xa9";
    r.source = i % 2 ? data::Source::svd : data::Source::youtube;
    r.label = data::implied_label(r.source);
    r.split = i < 2 ? data::Split::train : i < 4 ? data::Split::test_in : data::Split::test_out;
    for (int f = 0; f < 3; ++f) r.frame_paths.push_back("c" + std::to_string(i) + "/frame_" + std::to_string(f) + ".png");
    r.frame_count = 3;
    r.fps = 23.976 + i;
    r.source_width = 1024;
    r.source_height = 576;
    r.config_digest = "0123456789abcdef";
    if (i % 3 == 0) {
      r.dire_path = "c" + std::to_string(i) + "/dire.dvtn";
      r.dire_digest = "deadbeefdeadbeef";
    }
    m.entries.push_back(r);
  }
  data::write_manifest(m, dir / "m.jsonl");
  const auto back = data::read_manifest(dir / "m.jsonl");
  if (back.entries != m.entries) problems.push_back("manifest entries changed");
  if (data::serialize_manifest(back) != data::serialize_manifest(m)) problems.push_back("manifest text changed");

  Rng rng = make_rng(1010);
  const auto f = gaussian_tensor<float>({3, 5, 7, 2}, rng);
  const auto d = gaussian_tensor<double>({11, 13}, rng);
  data::write_tensor(f, (dir / "f.dvtn").string());
  data::write_tensor(d, (dir / "d.dvtn").string());
  const auto fb = data::read_tensor<float>((dir / "f.dvtn").string());
  const auto db = data::read_tensor<double>((dir / "d.dvtn").string());
  if (fb.shape() != f.shape() || !std::equal(f.begin(), f.end(), fb.begin())) problems.push_back("f32 tensor changed");
  if (db.shape() != d.shape() || !std::equal(d.begin(), d.end(), db.begin())) problems.push_back("f64 tensor changed");

  // Golden files written by an independent little-endian encoder.
  const std::string g = DIVID_TEST_DATA;
  const auto gf = data::read_tensor<float>(g + "/f32_2x3x4.dvtn");
  for (std::size_t i = 0; i < gf.size(); ++i) {
    const float expect = static_cast<float>((-1.5 + 0.25 * static_cast<double>(i)) * (i % 3 ? 1.0 : -1.0));
    if (gf[i] != expect || std::signbit(gf[i]) != std::signbit(expect)) {
      problems.push_back("golden f32 value " + std::to_string(i));
      break;
    }
  }
  const auto gl = data::read_tensor<std::int64_t>(g + "/i64_2x2.dvtn");
  if (std::vector<std::int64_t>(gl.begin(), gl.end()) !=
      std::vector<std::int64_t>{-(std::int64_t{1} << 40), -1, 0, std::int64_t{1} << 62})
    problems.push_back("golden i64 values");
  auto reencodes = [&](const std::string& name, const auto& t) {
    const auto bytes = data::encode_tensor(t);
    if (std::string(bytes.begin(), bytes.end()) != slurp(g + "/" + name)) problems.push_back("re-encoded " + name + " differs");
  };
  reencodes("f32_2x3x4.dvtn", gf);
  reencodes("f64_3x2.dvtn", data::read_tensor<double>(g + "/f64_3x2.dvtn"));
  reencodes("u8_5.dvtn", data::read_tensor<std::uint8_t>(g + "/u8_5.dvtn"));
  reencodes("i64_2x2.dvtn", gl);
  fs::remove_all(dir);
  std::string detail = problems.empty() ? "manifest, f32/f64 tensors and 4 little-endian golden files round-trip"
                                        : problems.front();
  for (std::size_t i = 1; i < problems.size(); ++i) detail += "; " + problems[i];
  return {problems.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"ddpm-ddim equivalence", ddpm_ddim_equivalence},
      {"deterministic sampling", deterministic_sampling},
      {"forward statistics", forward_statistics},
      {"dire identity and bound", dire_identity_and_bound},
      {"dire separation", dire_separation},
      {"lstm correctness", lstm_correctness},
      {"two-phase training", two_phase_training},
      {"ap oracle", ap_oracle},
      {"cli reports", cli_reports},
      {"persistence", persistence},
  };
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
