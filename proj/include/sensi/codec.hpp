#pragma once

#include "sensi/frames.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace sensi {

/// 8-bit RGB PNG bytes (zlib-deflated, filter type 0 on every row).
std::vector<std::uint8_t> encode_png(const RenderedImage& image);
void write_png(const RenderedImage& image, const std::filesystem::path& path);

/// `data:image/png;base64,...` URL, the form chat-completion APIs accept for images.
std::string png_data_url(const RenderedImage& image);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);

}  // namespace sensi
