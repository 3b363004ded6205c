#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "divid/core/error.hpp"
#include "divid/data/manifest.hpp"

namespace divid::eval {

inline constexpr double kDecisionThreshold = 0.5;

// Percentage of positions where the decision (score >= threshold) equals the label.
inline double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels) {
  if (predictions.empty()) throw UsageError("accuracy: empty input");
  if (predictions.size() != labels.size()) throw UsageError("accuracy: length mismatch");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += (predictions[i] != 0) == (labels[i] != 0);
  return 100.0 * static_cast<double>(correct) / static_cast<double>(labels.size());
}

inline std::vector<int> decisions(const std::vector<double>& scores, double threshold = kDecisionThreshold) {
  std::vector<int> out;
  out.reserve(scores.size());
  for (double s : scores) out.push_back(s >= threshold ? 1 : 0);
  return out;
}

inline double score_accuracy(const std::vector<double>& scores, const std::vector<int>& labels,
                             double threshold = kDecisionThreshold) {
  return accuracy(decisions(scores, threshold), labels);
}

// Descending-score ranking; ties keep the original order.
inline std::vector<std::size_t> ranking(const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

// All-points average precision, in percent: sum over ranks k of (R_k - R_{k-1}) * P_k.
inline double average_precision(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw UsageError("average_precision: length mismatch");
  const auto positives = static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](int l) { return l != 0; }));
  if (positives == 0) throw DataError("average precision is undefined without positive labels");
  std::size_t tp = 0;
  double ap = 0.0;
  const auto order = ranking(scores);
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (labels[order[k]] == 0) continue;
    ++tp;
    ap += static_cast<double>(tp) / static_cast<double>(k + 1) / static_cast<double>(positives);
  }
  return 100.0 * ap;
}

// Per-frame probabilities for one clip.
struct ScoredClip {
  std::string clip_id;
  data::Source source = data::Source::toy_real;
  data::Label label = data::Label::real;
  std::vector<double> scores;
};

struct MetricsReport {
  double accuracy = 0.0;
  double average_precision = 0.0;
  std::map<std::string, double> per_source;  // fake source -> accuracy on it and its paired real clips
  double total_average = 0.0;
  std::size_t n_frames = 0;
  double clip_accuracy = 0.0;  // secondary: per-clip mean probability at the same threshold
  std::size_t n_clips = 0;
  std::string config_digest;
};

// Real sources whose clips are scored together with a fake source's clips.
inline std::vector<data::Source> paired_real_sources(data::Source fake) {
  using data::Source;
  switch (fake) {
    case Source::svd:
    case Source::pika:
    case Source::gen2:
      return {Source::vidvrd, Source::toy_real};
    case Source::sora:
      return {Source::youtube, Source::toy_real};
    default:
      return {Source::vidvrd, Source::youtube, Source::toy_real};
  }
}

namespace detail {

inline void pool(const ScoredClip& c, std::vector<double>& scores, std::vector<int>& labels) {
  for (double s : c.scores) {
    scores.push_back(s);
    labels.push_back(c.label == data::Label::fake ? 1 : 0);
  }
}

}  // namespace detail

// Pools every frame of every clip, in clip-id order so score ties rank the same for any input order.
// Per-source entries use the fake clips of a source plus the real clips of its paired sources (all
// real clips when none of those are present).
inline MetricsReport summarize(const std::vector<ScoredClip>& input, double threshold = kDecisionThreshold) {
  if (input.empty()) throw DataError("no clips to evaluate");
  std::vector<ScoredClip> clips = input;
  std::stable_sort(clips.begin(), clips.end(),
                   [](const ScoredClip& a, const ScoredClip& b) { return a.clip_id < b.clip_id; });
  MetricsReport r;
  std::vector<double> scores;
  std::vector<int> labels;
  std::size_t clip_correct = 0;
  for (const auto& c : clips) {
    if (c.scores.empty()) throw DataError("clip '" + c.clip_id + "' has no frame scores");
    detail::pool(c, scores, labels);
    const double mean = std::accumulate(c.scores.begin(), c.scores.end(), 0.0) / static_cast<double>(c.scores.size());
    clip_correct += (mean >= threshold) == (c.label == data::Label::fake);
  }
  r.n_frames = scores.size();
  r.n_clips = clips.size();
  r.accuracy = score_accuracy(scores, labels, threshold);
  r.average_precision = average_precision(scores, labels);
  r.clip_accuracy = 100.0 * static_cast<double>(clip_correct) / static_cast<double>(clips.size());

  std::map<data::Source, std::vector<const ScoredClip*>> fakes;
  for (const auto& c : clips)
    if (c.label == data::Label::fake) fakes[c.source].push_back(&c);
  for (const auto& [src, fake_clips] : fakes) {
    const auto pairs = paired_real_sources(src);
    std::vector<const ScoredClip*> reals;
    for (const auto& c : clips)
      if (c.label == data::Label::real && std::find(pairs.begin(), pairs.end(), c.source) != pairs.end())
        reals.push_back(&c);
    if (reals.empty())
      for (const auto& c : clips)
        if (c.label == data::Label::real) reals.push_back(&c);
    std::vector<double> s;
    std::vector<int> l;
    for (const auto* c : fake_clips) detail::pool(*c, s, l);
    for (const auto* c : reals) detail::pool(*c, s, l);
    r.per_source[data::to_string(src)] = score_accuracy(s, l, threshold);
  }
  if (!r.per_source.empty()) {
    double sum = 0.0;
    for (const auto& [_, v] : r.per_source) sum += v;
    r.total_average = sum / static_cast<double>(r.per_source.size());
  }
  return r;
}

}  // namespace divid::eval
