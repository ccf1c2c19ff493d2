#include <catch2/catch_amalgamated.hpp>

#include "taihri/rng.hpp"
#include "taihri/voxel.hpp"

using namespace taihri;

namespace {

// Volume with origin at zero so local coordinates equal camera coordinates.
const InteractionVolume kZeroOrigin{4000.0, 3000.0, 4000.0, {0.0, 0.0, 0.0}};

Point3Cam random_in_volume(Rng &rng, const InteractionVolume &vol) {
    return {rng.uniform(vol.origin_mm[0], vol.origin_mm[0] + vol.width_mm),
            rng.uniform(vol.origin_mm[1], vol.origin_mm[1] + vol.height_mm),
            rng.uniform(vol.origin_mm[2], vol.origin_mm[2] + vol.depth_mm)};
}

} // namespace

TEST_CASE("encode_voxel quantizes the volume midpoint") {
    const VoxelToken t = encode_voxel({2000.0, 1.0, 1.0}, kZeroOrigin);
    CHECK(t.x == 500);
}

TEST_CASE("encode_voxel maps the minimum corner to token zero") {
    const VoxelToken t = encode_voxel({0.0, 0.0, 0.0}, kZeroOrigin);
    CHECK(t == VoxelToken{0, 0, 0});
}

TEST_CASE("encode_voxel rejects the half-open upper bound") {
    CHECK_THROWS_AS(encode_voxel({1.0, 1.0, 4000.0}, kZeroOrigin), OutOfVolume);
    try {
        encode_voxel({1.0, 1.0, 4000.0}, kZeroOrigin);
    } catch (const OutOfVolume &e) {
        CHECK(e.axis == 'z');
    }
}

TEST_CASE("encode_voxel tops out at index 999") {
    // Brute force over a 1 mm grid: no in-volume coordinate may exceed 999,
    // and the last millimeter band must reach it.
    int max_index = -1;
    for (int mm = 0; mm < 4000; ++mm) {
        const VoxelToken t = encode_voxel({static_cast<double>(mm), 1.0, 1.0}, kZeroOrigin);
        max_index = std::max(max_index, t.x);
    }
    CHECK(max_index == 999);
    CHECK(encode_voxel({3999.0, 1.0, 1.0}, kZeroOrigin).x == 999);
}

TEST_CASE("encode_voxel respects the volume origin") {
    const InteractionVolume vol = InteractionVolume::default_volume();
    const VoxelToken t = encode_voxel({0.0, 0.0, 2000.0}, vol);
    CHECK(t.x == 500);
    CHECK(t.y == 500);
    CHECK(t.z == 500);
}

TEST_CASE("decode_voxel reconstructs voxel centers") {
    const Point3Cam p = decode_voxel({500, 0, 0}, kZeroOrigin);
    CHECK(p.x == Catch::Approx(2002.0).epsilon(1e-12));
    CHECK(encode_voxel(p, kZeroOrigin).x == 500);
}

TEST_CASE("decode_voxel of token zero is the first voxel center") {
    const InteractionVolume unit{1000.0, 1000.0, 1000.0, {0.0, 0.0, 0.0}};
    const Point3Cam p = decode_voxel({0, 0, 0}, unit);
    CHECK(p.x == Catch::Approx(0.5));
    CHECK(p.y == Catch::Approx(0.5));
    CHECK(p.z == Catch::Approx(0.5));
}

TEST_CASE("decode_voxel rejects out-of-range tokens") {
    CHECK_THROWS_AS(decode_voxel({1000, 0, 0}, kZeroOrigin), TokenOutOfRange);
    CHECK_THROWS_AS(decode_voxel({0, -1, 0}, kZeroOrigin), TokenOutOfRange);
}

TEST_CASE("round-trip error stays within half a voxel per axis") {
    const InteractionVolume vol = InteractionVolume::default_volume();
    Rng rng(7);
    double sum_err_x = 0.0, sum_err_y = 0.0, sum_err_z = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const Point3Cam p = random_in_volume(rng, vol);
        const Point3Cam back = decode_voxel(encode_voxel(p, vol), vol);
        const double ex = std::abs(back.x - p.x);
        const double ey = std::abs(back.y - p.y);
        const double ez = std::abs(back.z - p.z);
        REQUIRE(ex <= vol.width_mm / 2000.0);
        REQUIRE(ey <= vol.height_mm / 2000.0);
        REQUIRE(ez <= vol.depth_mm / 2000.0);
        sum_err_x += ex;
        sum_err_y += ey;
        sum_err_z += ez;
    }
    // Mean per-axis error of uniform samples is extent/4000 (quarter voxel).
    CHECK(sum_err_x / n == Catch::Approx(vol.width_mm / 4000.0).epsilon(0.05));
    CHECK(sum_err_y / n == Catch::Approx(vol.height_mm / 4000.0).epsilon(0.05));
    CHECK(sum_err_z / n == Catch::Approx(vol.depth_mm / 4000.0).epsilon(0.05));
}

TEST_CASE("encoding is monotone per axis") {
    const InteractionVolume vol = InteractionVolume::default_volume();
    Rng rng(8);
    for (int i = 0; i < 5000; ++i) {
        Point3Cam p = random_in_volume(rng, vol);
        Point3Cam q = random_in_volume(rng, vol);
        if (p.x > q.x) std::swap(p.x, q.x);
        if (p.y > q.y) std::swap(p.y, q.y);
        if (p.z > q.z) std::swap(p.z, q.z);
        const VoxelToken tp = encode_voxel(p, vol);
        const VoxelToken tq = encode_voxel(q, vol);
        REQUIRE(tp.x <= tq.x);
        REQUIRE(tp.y <= tq.y);
        REQUIRE(tp.z <= tq.z);
    }
}

TEST_CASE("encode after decode is the identity on tokens") {
    const InteractionVolume vol = InteractionVolume::default_volume();
    Rng rng(9);
    for (int i = 0; i < 10000; ++i) {
        const VoxelToken t{static_cast<int>(rng.uniform_index(1000)),
                           static_cast<int>(rng.uniform_index(1000)),
                           static_cast<int>(rng.uniform_index(1000))};
        REQUIRE(encode_voxel(decode_voxel(t, vol), vol) == t);
    }
}

TEST_CASE("clamped encoding snaps out-of-volume points and sets the flag") {
    const auto below = encode_voxel_clamped({-1.0, 1.0, 1.0}, kZeroOrigin);
    CHECK(below.clamped);
    CHECK(below.token.x == 0);
    const auto above = encode_voxel_clamped({1.0, 1.0, 5000.0}, kZeroOrigin);
    CHECK(above.clamped);
    CHECK(above.token.z == 999);
    const auto inside = encode_voxel_clamped({2000.0, 1.0, 1.0}, kZeroOrigin);
    CHECK_FALSE(inside.clamped);
    CHECK(inside.token == encode_voxel({2000.0, 1.0, 1.0}, kZeroOrigin));
}
