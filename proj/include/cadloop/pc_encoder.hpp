#pragma once

#include <cadloop/geom.hpp>
#include <cadloop/mesh.hpp>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace cadloop {

/// One 6-D entry of the discrepancy encoding: where the sample sits and the
/// displacement to its nearest point on the opposite surface.
struct FeaturePoint {
    Vec3 position;
    Vec3 offset;
};

/// Two-sided discrepancy summary in the common frame: the target fit into
/// [-1,1]^3 and the prediction scaled by 1/100. 128 points per side.
struct DiscrepancyCloud {
    std::vector<FeaturePoint> target_points;
    std::vector<FeaturePoint> pred_points;
};

inline constexpr size_t kCloudSide = 128;
inline constexpr size_t kDenseSamples = 30000;

/// offset[i] = nearest point on `other` minus samples[i].
std::vector<Vec3> cross_offsets(const std::vector<Vec3>& samples, const TriangleMesh& other);

/// The k entries with the largest |offset|, descending; ties resolved by
/// sample index ascending. Throws InsufficientSamples when fewer than k exist.
std::pair<std::vector<Vec3>, std::vector<Vec3>> select_top_k(const std::vector<Vec3>& samples,
                                                             const std::vector<Vec3>& offsets,
                                                             size_t k = kCloudSide);

/// Dense-samples both meshes (30000 each), cross-queries nearest offsets in
/// both directions, and keeps the top 128 per side. Both meshes must already
/// live in the common frame: the target fit into [-1,1]^3, the render mapped
/// by the fixed 1/100 scale (the loop applies both before calling).
DiscrepancyCloud build_discrepancy_cloud(const TriangleMesh& target,
                                         const TriangleMesh& prev_render, uint64_t seed);

/// Null-prediction form for the first step, for a target already in [-1,1]^3:
/// target side keeps 128 samples p_i with offset -p_i; the prediction side is
/// 128 points at the origin whose offsets are the p_i routed through a seeded
/// permutation, so both offset multisets coincide.
DiscrepancyCloud init_discrepancy_cloud(const TriangleMesh& target, uint64_t seed);

/// Binary layout: magic "DCLD1", two uint32 counts, then per point six
/// little-endian IEEE doubles (x, y, z, dx, dy, dz), target side first.
std::vector<uint8_t> serialize_cloud(const DiscrepancyCloud& cloud);
DiscrepancyCloud parse_cloud(const std::vector<uint8_t>& bytes);

std::string serialize_cloud_json(const DiscrepancyCloud& cloud);
DiscrepancyCloud parse_cloud_json(const std::string& text);

}  // namespace cadloop
