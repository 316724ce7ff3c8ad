#include "sensi/frames.hpp"

#include "sensi/errors.hpp"

#include <array>

namespace sensi {

namespace {

constexpr std::array<std::string_view, 4> kStatusNames = {"NOT_PLAYED", "NOT_FINISHED", "GAME_OVER", "WIN"};

std::string excerpt(const nlohmann::json& j) {
    std::string text = j.dump();
    if (text.size() > 160) text = text.substr(0, 157) + "...";
    return text;
}

}  // namespace

std::string_view to_string(GameStatus status) { return kStatusNames[static_cast<std::size_t>(status)]; }

std::optional<GameStatus> parse_game_status(std::string_view text) {
    for (std::size_t i = 0; i < kStatusNames.size(); ++i) {
        if (text == kStatusNames[i]) return static_cast<GameStatus>(i);
    }
    return std::nullopt;
}

Frame::Frame(int layers, int height, int width, std::uint8_t fill)
    : layers_(layers), height_(height), width_(width),
      cells_(static_cast<std::size_t>(layers) * height * width, fill) {
    if (layers < 1 || height < 1 || width < 1 || height > kMaxGridDim || width > kMaxGridDim) {
        throw ValidationError("frame dims must satisfy L>=1, 1<=H<=64, 1<=W<=64, got " + shape_string());
    }
}

std::string Frame::shape_string() const {
    return std::to_string(layers_) + "x" + std::to_string(height_) + "x" + std::to_string(width_);
}

void Observation::validate() const {
    if (frame.layers() < 1 || frame.height() < 1 || frame.width() < 1 || frame.height() > kMaxGridDim ||
        frame.width() > kMaxGridDim) {
        throw ValidationError("observation frame has invalid dims " + frame.shape_string());
    }
    for (std::size_t i = 0; i < frame.cells().size(); ++i) {
        if (frame.cells()[i] > kMaxColor) {
            throw ValidationError("cell value " + std::to_string(frame.cells()[i]) + " outside [0,15] at index " +
                                  std::to_string(i));
        }
    }
    if (score < 0 || score > kMaxScore) {
        throw ValidationError("score " + std::to_string(score) + " outside [0,254]");
    }
    if (turn_index < 0) throw ValidationError("negative turn index");
}

nlohmann::json frame_to_json(const Frame& frame) {
    auto layers = nlohmann::json::array();
    for (int l = 0; l < frame.layers(); ++l) {
        auto rows = nlohmann::json::array();
        for (int r = 0; r < frame.height(); ++r) {
            auto row = nlohmann::json::array();
            for (int c = 0; c < frame.width(); ++c) row.push_back(frame.at(l, r, c));
            rows.push_back(std::move(row));
        }
        layers.push_back(std::move(rows));
    }
    return layers;
}

Frame frame_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.empty() || !j[0].is_array() || j[0].empty() || !j[0][0].is_array()) {
        throw ValidationError("frame must be a non-empty 3-D integer array: " + excerpt(j));
    }
    const int layers = static_cast<int>(j.size());
    const int height = static_cast<int>(j[0].size());
    const int width = static_cast<int>(j[0][0].size());
    if (height > kMaxGridDim || width > kMaxGridDim || width == 0) {
        throw ValidationError("frame dims out of range: " + excerpt(j));
    }
    Frame frame(layers, height, width);
    for (int l = 0; l < layers; ++l) {
        const auto& rows = j[l];
        if (!rows.is_array() || static_cast<int>(rows.size()) != height) {
            throw ValidationError("ragged frame layer " + std::to_string(l) + ": " + excerpt(j));
        }
        for (int r = 0; r < height; ++r) {
            const auto& row = rows[r];
            if (!row.is_array() || static_cast<int>(row.size()) != width) {
                throw ValidationError("ragged frame row " + std::to_string(r) + ": " + excerpt(j));
            }
            for (int c = 0; c < width; ++c) {
                if (!row[c].is_number_integer()) throw ValidationError("non-integer cell: " + excerpt(row));
                const auto v = row[c].get<long long>();
                if (v < 0 || v > kMaxColor) {
                    throw ValidationError("cell value " + std::to_string(v) + " outside [0,15]: " + excerpt(row));
                }
                frame.at(l, r, c) = static_cast<std::uint8_t>(v);
            }
        }
    }
    return frame;
}

nlohmann::json to_json(const Observation& obs) {
    return {{"frame", frame_to_json(obs.frame)},
            {"score", obs.score},
            {"status", std::string(to_string(obs.status))},
            {"turn", obs.turn_index}};
}

Observation observation_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ValidationError("observation must be an object: " + excerpt(j));
    for (const char* key : {"frame", "score", "status"}) {
        if (!j.contains(key)) throw ValidationError(std::string("observation missing '") + key + "': " + excerpt(j));
    }
    Observation obs;
    obs.frame = frame_from_json(j["frame"]);
    if (!j["score"].is_number_integer()) throw ValidationError("score must be an integer: " + excerpt(j["score"]));
    const auto score = j["score"].get<long long>();
    if (score < 0 || score > kMaxScore) {
        throw ValidationError("score " + std::to_string(score) + " outside [0,254]: " + excerpt(j["score"]));
    }
    obs.score = static_cast<int>(score);
    if (!j["status"].is_string()) throw ValidationError("status must be a string: " + excerpt(j["status"]));
    auto status = parse_game_status(j["status"].get<std::string>());
    if (!status) throw ValidationError("unknown status: " + excerpt(j["status"]));
    obs.status = *status;
    if (j.contains("turn")) {
        if (!j["turn"].is_number_integer() || j["turn"].get<long long>() < 0) {
            throw ValidationError("turn must be a non-negative integer: " + excerpt(j["turn"]));
        }
        obs.turn_index = j["turn"].get<int>();
    }
    obs.validate();
    return obs;
}

std::string frame_to_text(const Frame& frame) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(static_cast<std::size_t>(frame.layers()) * frame.height() * (frame.width() + 1) + 16);
    for (int l = 0; l < frame.layers(); ++l) {
        if (frame.layers() > 1) out += "layer " + std::to_string(l) + ":\n";
        for (int r = 0; r < frame.height(); ++r) {
            for (int c = 0; c < frame.width(); ++c) out += kHex[frame.at(l, r, c) & 0xF];
            out += '\n';
        }
    }
    return out;
}

const Palette& default_palette() {
    // ARC-style colors for 0-9, then six extra distinguishable entries.
    static const Palette palette = {{
        {0x00, 0x00, 0x00}, {0x00, 0x74, 0xD9}, {0xFF, 0x41, 0x36}, {0x2E, 0xCC, 0x40},
        {0xFF, 0xDC, 0x00}, {0xAA, 0xAA, 0xAA}, {0xF0, 0x12, 0xBE}, {0xFF, 0x85, 0x1B},
        {0x7F, 0xDB, 0xFF}, {0x87, 0x0C, 0x25}, {0xFF, 0xFF, 0xFF}, {0x55, 0x55, 0x55},
        {0x00, 0x80, 0x80}, {0x80, 0x80, 0x00}, {0xB1, 0x0D, 0xC9}, {0x3D, 0x99, 0x70},
    }};
    return palette;
}

RenderedImage render(const Observation& obs, const Palette& palette, int scale) {
    if (scale < 1) throw ValidationError("render scale must be >= 1, got " + std::to_string(scale));
    obs.validate();
    const Frame& f = obs.frame;
    RenderedImage img;
    img.scale = scale;
    img.width_px = f.width() * scale;
    img.height_px = f.height() * scale;
    img.pixels.resize(static_cast<std::size_t>(img.width_px) * img.height_px);
    for (int r = 0; r < f.height(); ++r) {
        for (int c = 0; c < f.width(); ++c) {
            std::uint8_t color = f.at(0, r, c);
            for (int l = 1; l < f.layers(); ++l) {
                if (f.at(l, r, c) != 0) color = f.at(l, r, c);
            }
            const Rgb rgb = palette[color];
            for (int dy = 0; dy < scale; ++dy) {
                auto* row = &img.pixels[static_cast<std::size_t>(r * scale + dy) * img.width_px + c * scale];
                for (int dx = 0; dx < scale; ++dx) row[dx] = rgb;
            }
        }
    }
    return img;
}

}  // namespace sensi
