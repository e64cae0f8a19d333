#include "apex/data/image_io.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <opencv2/core.hpp>
#include <opencv2/core/version.hpp>
#include <opencv2/imgcodecs.hpp>

#include "apex/core/errors.hpp"

namespace apex::data {

PlotImage decode_image(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) throw InputError("empty image data");
  cv::Mat bgr;
  try {
    const cv::Mat raw(1, static_cast<int>(bytes.size()), CV_8UC1,
                      const_cast<std::uint8_t*>(bytes.data()));
    bgr = cv::imdecode(raw, cv::IMREAD_COLOR);
  } catch (const cv::Exception& e) {
    throw InputError(std::string("cannot decode image: ") + e.what());
  }
  if (bgr.empty() || bgr.type() != CV_8UC3) throw InputError("cannot decode image");

  PlotImage out(static_cast<std::size_t>(bgr.rows), static_cast<std::size_t>(bgr.cols));
  for (int r = 0; r < bgr.rows; ++r) {
    const auto* row = bgr.ptr<cv::Vec3b>(r);
    for (int c = 0; c < bgr.cols; ++c) {
      for (std::size_t ch = 0; ch < 3; ++ch) {
        out.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c), ch) =
            static_cast<float>(row[c][2 - ch]) / 255.0f;
      }
    }
  }
  return out;
}

PlotImage read_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open image " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  return decode_image(bytes);
}

std::vector<std::uint8_t> encode_png(const PlotImage& image) {
  if (image.empty() || image.pixels.size() != image.height * image.width * 3) {
    throw InvalidArgument("cannot encode an empty or malformed image", "image");
  }
  cv::Mat bgr(static_cast<int>(image.height), static_cast<int>(image.width), CV_8UC3);
  for (int r = 0; r < bgr.rows; ++r) {
    auto* row = bgr.ptr<cv::Vec3b>(r);
    for (int c = 0; c < bgr.cols; ++c) {
      for (std::size_t ch = 0; ch < 3; ++ch) {
        const float v = image.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c), ch);
        row[c][2 - ch] = cv::saturate_cast<std::uint8_t>(std::lround(v * 255.0f));
      }
    }
  }
  std::vector<std::uint8_t> out;
  if (!cv::imencode(".png", bgr, out)) throw InputError("PNG encoding failed");
  return out;
}

void write_png(const PlotImage& image, const std::filesystem::path& path) {
  const auto bytes = encode_png(image);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string backend_version() { return std::string("opencv-") + CV_VERSION; }

}  // namespace apex::data
