#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "divid/core/error.hpp"
#include "divid/core/tensor.hpp"
#include "divid/diffusion/schedule.hpp"

namespace divid::diffusion {

// A timestep together with the length of the schedule it belongs to, so predictors trained on one
// schedule length can rescale.
struct TimeIndex {
  int step = 0;
  int total_steps = 1;

  double fraction() const { return static_cast<double>(step) / total_steps; }
};

struct PredictorInfo {
  std::string name;
  int height = 0;
  int width = 0;
  int channels = 3;
  std::string checkpoint;
  // True when one instance may be evaluated from several threads at once.
  bool shareable = true;
};

// epsilon_theta(x_t, t). Implementations must be pure: same inputs, same output, same shape.
template <typename T>
class BasicNoisePredictor {
 public:
  virtual ~BasicNoisePredictor() = default;
  virtual BasicTensor<T> predict(const BasicTensor<T>& x, TimeIndex t) const = 0;
  virtual PredictorInfo info() const = 0;
};

using NoisePredictor = BasicNoisePredictor<float>;

template <typename T>
class ZeroPredictor final : public BasicNoisePredictor<T> {
 public:
  explicit ZeroPredictor(int height = 0, int width = 0, int channels = 3) : info_{"zero", height, width, channels, "", true} {}

  BasicTensor<T> predict(const BasicTensor<T>& x, TimeIndex) const override { return BasicTensor<T>(x.shape()); }
  PredictorInfo info() const override { return info_; }

 private:
  PredictorInfo info_;
};

// Exact noise predictor for data drawn i.i.d. per element from N(mean, stddev^2):
//   eps(x, t) = sqrt(1 - ab) * (x - sqrt(ab) * mean) / (ab * stddev^2 + 1 - ab)
template <typename T>
class LinearGaussianPredictor final : public BasicNoisePredictor<T> {
 public:
  LinearGaussianPredictor(NoiseSchedule schedule, double mean, double stddev)
      : schedule_(std::move(schedule)), mean_(mean), var_(stddev * stddev) {}

  BasicTensor<T> predict(const BasicTensor<T>& x, TimeIndex t) const override {
    if (t.total_steps != schedule_.total_steps()) throw UsageError("linear-gaussian predictor: schedule length mismatch");
    const double ab = schedule_.alpha_bar(t.step);
    const double gain = std::sqrt(1.0 - ab) / (ab * var_ + 1.0 - ab);
    const double offset = std::sqrt(ab) * mean_;
    BasicTensor<T> out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = static_cast<T>(gain * (static_cast<double>(x[i]) - offset));
    return out;
  }

  PredictorInfo info() const override { return {"linear-gaussian", 0, 0, 0, "", true}; }

 private:
  NoiseSchedule schedule_;
  double mean_;
  double var_;
};

// Adapter around a callable; handy for tests and stubs.
template <typename T>
class FunctionPredictor final : public BasicNoisePredictor<T> {
 public:
  using Fn = std::function<BasicTensor<T>(const BasicTensor<T>&, TimeIndex)>;
  explicit FunctionPredictor(Fn fn, PredictorInfo info = {"function", 0, 0, 0, "", true})
      : fn_(std::move(fn)), info_(std::move(info)) {}

  BasicTensor<T> predict(const BasicTensor<T>& x, TimeIndex t) const override {
    BasicTensor<T> out = fn_(x, t);
    require_same_shape(out, x, "predictor output");
    return out;
  }
  PredictorInfo info() const override { return info_; }

 private:
  Fn fn_;
  PredictorInfo info_;
};

// Named predictor entries. Each entry declares its native geometry and how to materialise it from a
// checkpoint locator.
class PredictorRegistry {
 public:
  using Factory = std::function<std::unique_ptr<NoisePredictor>(const std::string& locator)>;

  struct Entry {
    PredictorInfo info;
    Factory factory;
  };

  void add(PredictorInfo info, Factory factory) {
    const std::string name = info.name;
    entries_[name] = Entry{std::move(info), std::move(factory)};
  }

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }

  const Entry& entry(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw UsageError("unknown predictor '" + name + "'");
    return it->second;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [name, _] : entries_) out.push_back(name);
    return out;
  }

  // An empty locator selects the entry's declared default checkpoint.
  std::unique_ptr<NoisePredictor> create(const std::string& name, const std::string& locator = "") const {
    const Entry& e = entry(name);
    return e.factory(locator.empty() ? e.info.checkpoint : locator);
  }

 private:
  std::map<std::string, Entry> entries_;
};

}  // namespace divid::diffusion
