#pragma once

// 8-bit image files <-> [3,H,W] tensors in [-1,1] (RGB channel order).

#include <string>

#include "arfp/tensor.hpp"

namespace arfp {

// Quantized 8-bit value of a pixel in [-1,1]: round half away from zero of (v+1)/2*255.
int to_u8(double v);

// Reads any format OpenCV decodes; size > 0 resizes to size x size.
Tensor read_image(const std::string& path, int size = 0);
void write_png(const std::string& path, const Tensor& image);
// Encode as JPEG at the given quality and decode again.
Tensor jpeg_roundtrip(const Tensor& image, int quality);
// Quantize to 8 bits and back, as a PNG round trip would.
Tensor quantize_u8(const Tensor& image);

}  // namespace arfp
