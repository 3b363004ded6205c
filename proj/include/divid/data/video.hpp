#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <opencv2/videoio.hpp>

#include "divid/core/error.hpp"
#include "divid/dire/frame.hpp"

namespace divid::data {

struct DecodeConfig {
  // 0 = decode every frame.
  int max_frames = 0;
};

struct DecodedVideo {
  std::vector<dire::RawFrame> frames;
  double fps = 0.0;
};

namespace detail {

inline dire::RawFrame from_bgr(const cv::Mat& bgr, int index) {
  cv::Mat rgb;
  if (bgr.channels() == 1) {
    cv::cvtColor(bgr, rgb, cv::COLOR_GRAY2RGB);
  } else if (bgr.channels() == 4) {
    cv::cvtColor(bgr, rgb, cv::COLOR_BGRA2RGB);
  } else {
    cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  }
  cv::Mat f;
  rgb.convertTo(f, CV_32FC3, bgr.depth() == CV_16U ? 255.0 / 65535.0 : 1.0);
  dire::RawFrame raw;
  raw.width = f.cols;
  raw.height = f.rows;
  raw.channels = 3;
  raw.frame_index = index;
  raw.pixels.assign(f.ptr<float>(0), f.ptr<float>(0) + static_cast<std::size_t>(f.total()) * 3);
  return raw;
}

inline cv::Mat to_bgr(const dire::RawFrame& raw) {
  if (raw.channels != 3) throw UsageError("only 3-channel frames can be written");
  cv::Mat f(raw.height, raw.width, CV_32FC3, const_cast<float*>(raw.pixels.data()));
  cv::Mat rgb8;
  f.convertTo(rgb8, CV_8UC3, 255.0 / raw.max_value);
  cv::Mat bgr;
  cv::cvtColor(rgb8, bgr, cv::COLOR_RGB2BGR);
  return bgr;
}

}  // namespace detail

// Decodes a video in presentation order at native resolution.
inline DecodedVideo extract_frames(const std::string& locator, const DecodeConfig& config = {}) {
  if (!std::filesystem::exists(locator)) throw DataError("cannot read video " + locator + ": no such file");
  cv::VideoCapture cap(locator);
  if (!cap.isOpened()) throw DataError("cannot decode video " + locator);
  DecodedVideo out;
  out.fps = cap.get(cv::CAP_PROP_FPS);
  cv::Mat frame;
  while (cap.read(frame)) {
    if (frame.empty()) break;
    out.frames.push_back(detail::from_bgr(frame, static_cast<int>(out.frames.size())));
    if (config.max_frames > 0 && static_cast<int>(out.frames.size()) >= config.max_frames) break;
  }
  if (out.frames.empty()) throw DataError("video " + locator + " decoded to zero frames");
  return out;
}

// Lossless (FFV1) encode; used for synthetic test videos.
inline void write_video(const std::vector<dire::RawFrame>& frames, const std::string& locator, double fps) {
  if (frames.empty()) throw UsageError("cannot write an empty video");
  cv::VideoWriter w(locator, cv::VideoWriter::fourcc('F', 'F', 'V', '1'), fps,
                    cv::Size(frames.front().width, frames.front().height));
  if (!w.isOpened()) throw DataError("cannot open video writer for " + locator);
  for (const auto& f : frames) w.write(detail::to_bgr(f));
}

inline dire::RawFrame load_frame(const std::string& path, int frame_index) {
  cv::Mat img = cv::imread(path, cv::IMREAD_UNCHANGED);
  if (img.empty()) throw FrameError(ErrorKind::data, frame_index, "cannot decode image " + path);
  return detail::from_bgr(img, frame_index);
}

inline void save_frame(const dire::RawFrame& frame, const std::string& path) {
  if (!cv::imwrite(path, detail::to_bgr(frame))) throw DataError("cannot write image " + path);
}

}  // namespace divid::data
