#include "sensi/errors.hpp"
#include "sensi/frames.hpp"

#include <doctest.h>

#include <random>

using namespace sensi;
using nlohmann::json;

namespace {

Frame random_frame(std::mt19937& rng, int layers, int h, int w) {
    Frame f(layers, h, w);
    for (int l = 0; l < layers; ++l)
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) f.at(l, r, c) = static_cast<std::uint8_t>(rng() % 16);
    return f;
}

}  // namespace

TEST_CASE("frame dimensions are bounded") {
    CHECK_NOTHROW(Frame(1, 1, 1));
    CHECK_NOTHROW(Frame(2, 64, 64));
    CHECK_THROWS_AS(Frame(0, 4, 4), ValidationError);
    CHECK_THROWS_AS(Frame(1, 0, 4), ValidationError);
    CHECK_THROWS_AS(Frame(1, 4, 65), ValidationError);
}

TEST_CASE("observation validation") {
    Observation obs{Frame(1, 2, 2), 0, GameStatus::NotFinished, 0};
    CHECK_NOTHROW(obs.validate());
    obs.score = 255;
    CHECK_THROWS_AS(obs.validate(), ValidationError);
    obs.score = 254;
    obs.frame.at(0, 1, 1) = 16;
    CHECK_THROWS_AS(obs.validate(), ValidationError);
    obs.frame.at(0, 1, 1) = 15;
    obs.turn_index = -1;
    CHECK_THROWS_AS(obs.validate(), ValidationError);
}

TEST_CASE("observations round-trip through the wire form") {
    std::mt19937 rng(5);
    for (int i = 0; i < 50; ++i) {
        Observation obs{random_frame(rng, 1 + static_cast<int>(rng() % 2), 1 + static_cast<int>(rng() % 9),
                                     1 + static_cast<int>(rng() % 9)),
                        static_cast<int>(rng() % 255), static_cast<GameStatus>(rng() % 4), static_cast<int>(rng() % 100)};
        CHECK(observation_from_json(to_json(obs)) == obs);
    }
}

TEST_CASE("malformed wire observations quote the payload") {
    json good = to_json(Observation{Frame(1, 2, 2), 3, GameStatus::NotFinished, 1});
    auto bad = good;
    bad["score"] = 300;
    CHECK_THROWS_WITH_AS(observation_from_json(bad), doctest::Contains("300"), ValidationError);
    bad = good;
    bad["frame"] = json::parse("[[[0,1],[2]]]");
    CHECK_THROWS_AS(observation_from_json(bad), ValidationError);
    bad = good;
    bad["frame"] = json::parse("[[[0,16],[2,3]]]");
    CHECK_THROWS_AS(observation_from_json(bad), ValidationError);
    bad = good;
    bad["status"] = "LOST";
    CHECK_THROWS_AS(observation_from_json(bad), ValidationError);
    bad = good;
    bad.erase("status");
    CHECK_THROWS_AS(observation_from_json(bad), ValidationError);
    CHECK_THROWS_AS(observation_from_json(json::array()), ValidationError);
}

TEST_CASE("status names") {
    for (auto s : {GameStatus::NotPlayed, GameStatus::NotFinished, GameStatus::GameOver, GameStatus::Win})
        CHECK(parse_game_status(to_string(s)) == s);
    CHECK(to_string(GameStatus::GameOver) == "GAME_OVER");
    CHECK_FALSE(parse_game_status("DONE"));
}

TEST_CASE("render: a single cell at scale 1 is one pixel of its palette color") {
    Observation obs{Frame(1, 1, 1, 3), 0, GameStatus::NotFinished, 0};
    auto img = render(obs, default_palette(), 1);
    CHECK(img.width_px == 1);
    CHECK(img.height_px == 1);
    CHECK(img.pixel(0, 0) == default_palette()[3]);
}

TEST_CASE("render: every pixel takes the palette color of its cell") {
    std::mt19937 rng(9);
    for (int scale : {1, 2, 10}) {
        Frame f = random_frame(rng, 1, 1 + static_cast<int>(rng() % 7), 1 + static_cast<int>(rng() % 7));
        auto img = render(Observation{f, 0, GameStatus::NotFinished, 0}, default_palette(), scale);
        REQUIRE(img.width_px == f.width() * scale);
        REQUIRE(img.height_px == f.height() * scale);
        for (int y = 0; y < img.height_px; ++y)
            for (int x = 0; x < img.width_px; ++x)
                CHECK(img.pixel(x, y) == default_palette()[f.at(0, y / scale, x / scale)]);
    }
}

TEST_CASE("render: higher layers overdraw only where nonzero") {
    Frame f(2, 1, 2);
    f.at(0, 0, 0) = 1;
    f.at(0, 0, 1) = 2;
    f.at(1, 0, 1) = 5;
    auto img = render(Observation{f, 0, GameStatus::NotFinished, 0}, default_palette(), 1);
    CHECK(img.pixel(0, 0) == default_palette()[1]);
    CHECK(img.pixel(1, 0) == default_palette()[5]);
}

TEST_CASE("render rejects a non-positive scale") {
    Observation obs{Frame(1, 2, 2), 0, GameStatus::NotFinished, 0};
    CHECK_THROWS_AS(render(obs, default_palette(), 0), ValidationError);
}

TEST_CASE("frame text is one hex row per frame row") {
    Frame f(1, 2, 3);
    f.at(0, 0, 2) = 10;
    f.at(0, 1, 0) = 15;
    auto text = frame_to_text(f);
    CHECK(text.find("00a") != std::string::npos);
    CHECK(text.find("f00") != std::string::npos);
}
