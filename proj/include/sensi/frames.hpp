#pragma once

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sensi {

enum class GameStatus { NotPlayed, NotFinished, GameOver, Win };

std::string_view to_string(GameStatus status);
std::optional<GameStatus> parse_game_status(std::string_view text);

inline constexpr int kMaxGridDim = 64;
inline constexpr int kMaxColor = 15;
inline constexpr int kMaxScore = 254;

/// Layers x height x width grid of color indices, stored layer-major then row-major.
class Frame {
public:
    Frame() = default;
    Frame(int layers, int height, int width, std::uint8_t fill = 0);

    int layers() const { return layers_; }
    int height() const { return height_; }
    int width() const { return width_; }

    std::uint8_t at(int layer, int row, int col) const { return cells_[index(layer, row, col)]; }
    std::uint8_t& at(int layer, int row, int col) { return cells_[index(layer, row, col)]; }

    bool in_bounds(int row, int col) const { return row >= 0 && row < height_ && col >= 0 && col < width_; }
    bool same_shape(const Frame& other) const {
        return layers_ == other.layers_ && height_ == other.height_ && width_ == other.width_;
    }
    std::string shape_string() const;

    const std::vector<std::uint8_t>& cells() const { return cells_; }

    bool operator==(const Frame&) const = default;

private:
    std::size_t index(int layer, int row, int col) const {
        return (static_cast<std::size_t>(layer) * height_ + row) * width_ + col;
    }

    int layers_ = 0;
    int height_ = 0;
    int width_ = 0;
    std::vector<std::uint8_t> cells_;
};

struct Observation {
    Frame frame;
    int score = 0;
    GameStatus status = GameStatus::NotPlayed;
    int turn_index = 0;

    /// Throws ValidationError on any invariant breach.
    void validate() const;

    bool operator==(const Observation&) const = default;
};

/// Wire form: `{frame: [[[..]]], score, status, turn}`.
nlohmann::json to_json(const Observation& obs);
/// Parses and validates; bad shapes or ranges raise ValidationError quoting the payload.
Observation observation_from_json(const nlohmann::json& j);

nlohmann::json frame_to_json(const Frame& frame);
Frame frame_from_json(const nlohmann::json& j);

/// Hex-digit rows, one block per layer. Used in prompts.
std::string frame_to_text(const Frame& frame);

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
    bool operator==(const Rgb&) const = default;
};

using Palette = std::array<Rgb, 16>;

const Palette& default_palette();

inline constexpr int kDefaultScale = 10;

struct RenderedImage {
    int width_px = 0;
    int height_px = 0;
    int scale = 1;
    std::vector<Rgb> pixels;  // row-major

    const Rgb& pixel(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width_px + x]; }
};

/// Each cell becomes a scale x scale block; higher layers overdraw where nonzero.
RenderedImage render(const Observation& obs, const Palette& palette = default_palette(), int scale = kDefaultScale);

}  // namespace sensi
