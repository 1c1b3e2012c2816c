#include "arfp/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "arfp/errors.hpp"

namespace arfp {

namespace {

cv::Mat to_mat(const Tensor& image) {
    if (image.rank() != 3 || image.dim(0) != 3) throw std::invalid_argument("expected a [3,H,W] image");
    const int H = image.dim(1), W = image.dim(2);
    cv::Mat m(H, W, CV_8UC3);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            cv::Vec3b& px = m.at<cv::Vec3b>(y, x);
            for (int c = 0; c < 3; ++c)  // OpenCV stores BGR
                px[2 - c] = static_cast<std::uint8_t>(to_u8(image[static_cast<std::size_t>((c * H + y) * W + x)]));
        }
    return m;
}

Tensor from_mat(const cv::Mat& m) {
    const int H = m.rows, W = m.cols;
    Tensor t({3, H, W});
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const cv::Vec3b& px = m.at<cv::Vec3b>(y, x);
            for (int c = 0; c < 3; ++c) t[static_cast<std::size_t>((c * H + y) * W + x)] = px[2 - c] / 127.5 - 1.0;
        }
    return t;
}

}  // namespace

int to_u8(double v) {
    const double s = (std::clamp(v, -1.0, 1.0) + 1.0) / 2.0 * 255.0;
    return static_cast<int>(std::lround(s));
}

Tensor read_image(const std::string& path, int size) {
    cv::Mat m = cv::imread(path, cv::IMREAD_COLOR);
    if (m.empty()) throw IoError("cannot read image", path);
    if (size > 0 && (m.rows != size || m.cols != size)) {
        cv::Mat r;
        const bool shrink = m.rows > size && m.cols > size;
        cv::resize(m, r, cv::Size(size, size), 0, 0, shrink ? cv::INTER_AREA : cv::INTER_LINEAR);
        m = r;
    }
    return from_mat(m);
}

void write_png(const std::string& path, const Tensor& image) {
    if (!cv::imwrite(path, to_mat(image))) throw IoError("cannot write image", path);
}

Tensor jpeg_roundtrip(const Tensor& image, int quality) {
    if (quality < 1 || quality > 100) throw std::invalid_argument("JPEG quality must lie in [1, 100]");
    std::vector<std::uint8_t> buf;
    if (!cv::imencode(".jpg", to_mat(image), buf, {cv::IMWRITE_JPEG_QUALITY, quality}))
        throw std::runtime_error("JPEG encoding failed");
    return from_mat(cv::imdecode(buf, cv::IMREAD_COLOR));
}

Tensor quantize_u8(const Tensor& image) {
    Tensor out(image.shape());
    for (std::size_t i = 0; i < image.size(); ++i) out[i] = to_u8(image[i]) / 127.5 - 1.0;
    return out;
}

}  // namespace arfp
