#include "vhist/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace vhist {

Image::Image(int width, int height, int channels, float fill)
    : width_(width), height_(height), channels_(channels) {
  if (width < 0 || height < 0 || channels <= 0) {
    throw DimensionError("invalid image shape " + std::to_string(width) + "x" +
                         std::to_string(height) + "x" + std::to_string(channels));
  }
  data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

Image Image::crop(int x, int y, int w, int h) const {
  if (x < 0 || y < 0 || w < 0 || h < 0 || x + w > width_ || y + h > height_) {
    throw DimensionError("crop rectangle leaves the image");
  }
  Image out(w, h, channels_);
  const std::size_t row = static_cast<std::size_t>(w) * channels_;
  for (int r = 0; r < h; ++r) {
    const float* src = data_.data() + (static_cast<std::size_t>(y + r) * width_ + x) * channels_;
    std::copy(src, src + row, out.data() + r * row);
  }
  return out;
}

void Image::paste(const Image& src, int x, int y) {
  if (src.channels_ != channels_) throw DimensionError("paste: channel mismatch");
  if (x < 0 || y < 0 || x + src.width_ > width_ || y + src.height_ > height_) {
    throw DimensionError("paste rectangle leaves the image");
  }
  const std::size_t row = static_cast<std::size_t>(src.width_) * channels_;
  for (int r = 0; r < src.height_; ++r) {
    float* dst = data_.data() + (static_cast<std::size_t>(y + r) * width_ + x) * channels_;
    std::copy(src.data() + r * row, src.data() + (r + 1) * row, dst);
  }
}

Image replicate_channels(const Image& gray, int channels) {
  if (gray.channels() == channels) return gray;
  if (gray.channels() != 1) throw DimensionError("replicate_channels expects a single channel");
  Image out(gray.width(), gray.height(), channels);
  const std::size_t n = static_cast<std::size_t>(gray.width()) * gray.height();
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < channels; ++c) out.data()[i * channels + c] = gray.data()[i];
  }
  return out;
}

double max_abs_diff(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw DimensionError("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a.data()[i]) - b.data()[i]));
  }
  return m;
}

}  // namespace vhist
