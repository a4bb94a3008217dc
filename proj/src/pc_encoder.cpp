#include <cadloop/error.hpp>
#include <cadloop/pc_encoder.hpp>
#include <cadloop/surface_query.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

namespace cadloop {
namespace {

std::vector<Vec3> offsets_against(const std::vector<Vec3>& samples, const SurfaceIndex& index) {
    std::vector<Vec3> offsets(samples.size());
    for (size_t i = 0; i < samples.size(); ++i)
        offsets[i] = index.nearest(samples[i]).point - samples[i];
    return offsets;
}

std::vector<Vec3> positions_of(const std::vector<PointSample>& samples) {
    std::vector<Vec3> out(samples.size());
    for (size_t i = 0; i < samples.size(); ++i) out[i] = samples[i].position;
    return out;
}

std::vector<FeaturePoint> zip_side(const std::vector<Vec3>& points,
                                   const std::vector<Vec3>& offsets) {
    std::vector<FeaturePoint> side(points.size());
    for (size_t i = 0; i < points.size(); ++i) side[i] = {points[i], offsets[i]};
    return side;
}

void require_finite(const DiscrepancyCloud& cloud) {
    auto check = [](const std::vector<FeaturePoint>& side) {
        for (const FeaturePoint& fp : side)
            for (int k = 0; k < 3; ++k)
                if (!std::isfinite(fp.position[k]) || !std::isfinite(fp.offset[k]))
                    throw Error(ErrorCode::corrupt_payload, "non-finite feature component");
    };
    check(cloud.target_points);
    check(cloud.pred_points);
}

}  // namespace

std::vector<Vec3> cross_offsets(const std::vector<Vec3>& samples, const TriangleMesh& other) {
    if (samples.empty())
        throw Error(ErrorCode::insufficient_samples, "cross_offsets needs at least one sample");
    SurfaceIndex index(other);
    return offsets_against(samples, index);
}

std::pair<std::vector<Vec3>, std::vector<Vec3>> select_top_k(const std::vector<Vec3>& samples,
                                                             const std::vector<Vec3>& offsets,
                                                             size_t k) {
    if (samples.size() != offsets.size())
        throw Error(ErrorCode::dimension_mismatch, "samples and offsets differ in length");
    if (samples.size() < k)
        throw Error(ErrorCode::insufficient_samples,
                    "need " + std::to_string(k) + " samples, have " +
                        std::to_string(samples.size()));
    std::vector<size_t> order(samples.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        double da = length_squared(offsets[a]), db = length_squared(offsets[b]);
        if (da != db) return da > db;
        return a < b;
    });
    std::pair<std::vector<Vec3>, std::vector<Vec3>> out;
    out.first.reserve(k);
    out.second.reserve(k);
    for (size_t i = 0; i < k; ++i) {
        out.first.push_back(samples[order[i]]);
        out.second.push_back(offsets[order[i]]);
    }
    return out;
}

DiscrepancyCloud build_discrepancy_cloud(const TriangleMesh& target,
                                         const TriangleMesh& prev_render, uint64_t seed) {
    auto target_pts = positions_of(sample_surface(target, kDenseSamples, derive_seed(seed, 0)));
    auto pred_pts = positions_of(sample_surface(prev_render, kDenseSamples, derive_seed(seed, 1)));

    SurfaceIndex target_index(target);
    SurfaceIndex pred_index(prev_render);
    auto target_off = offsets_against(target_pts, pred_index);
    auto pred_off = offsets_against(pred_pts, target_index);

    auto [tp, to] = select_top_k(target_pts, target_off, kCloudSide);
    auto [pp, po] = select_top_k(pred_pts, pred_off, kCloudSide);

    DiscrepancyCloud cloud{zip_side(tp, to), zip_side(pp, po)};
    require_finite(cloud);
    return cloud;
}

DiscrepancyCloud init_discrepancy_cloud(const TriangleMesh& target, uint64_t seed) {
    auto samples = positions_of(sample_surface(target, kCloudSide, derive_seed(seed, 0)));

    DiscrepancyCloud cloud;
    cloud.target_points.reserve(kCloudSide);
    for (const Vec3& p : samples) cloud.target_points.push_back({p, -p});

    std::vector<size_t> perm(kCloudSide);
    std::iota(perm.begin(), perm.end(), size_t{0});
    Rng rng(derive_seed(seed, 1));
    for (size_t i = kCloudSide; i > 1; --i)
        std::swap(perm[i - 1], perm[rng.uniform_index(i)]);

    cloud.pred_points.reserve(kCloudSide);
    for (size_t j = 0; j < kCloudSide; ++j)
        cloud.pred_points.push_back({Vec3{0, 0, 0}, samples[perm[j]]});
    require_finite(cloud);
    return cloud;
}

std::vector<uint8_t> serialize_cloud(const DiscrepancyCloud& cloud) {
    std::vector<uint8_t> out;
    out.reserve(5 + 8 + (cloud.target_points.size() + cloud.pred_points.size()) * 48);
    const char magic[5] = {'D', 'C', 'L', 'D', '1'};
    out.insert(out.end(), magic, magic + 5);
    auto push_u32 = [&](uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back(uint8_t(v >> (8 * i)));
    };
    push_u32(uint32_t(cloud.target_points.size()));
    push_u32(uint32_t(cloud.pred_points.size()));
    auto push_d = [&](double v) {
        uint64_t bits;
        std::memcpy(&bits, &v, 8);
        for (int i = 0; i < 8; ++i) out.push_back(uint8_t(bits >> (8 * i)));
    };
    for (const auto* side : {&cloud.target_points, &cloud.pred_points})
        for (const FeaturePoint& fp : *side) {
            for (int k = 0; k < 3; ++k) push_d(fp.position[k]);
            for (int k = 0; k < 3; ++k) push_d(fp.offset[k]);
        }
    return out;
}

DiscrepancyCloud parse_cloud(const std::vector<uint8_t>& bytes) {
    auto fail = [](const char* why) -> Error {
        return Error(ErrorCode::corrupt_payload, std::string("discrepancy cloud: ") + why);
    };
    if (bytes.size() < 13 || std::memcmp(bytes.data(), "DCLD1", 5) != 0) throw fail("bad magic");
    auto read_u32 = [&](size_t at) {
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= uint32_t(bytes[at + i]) << (8 * i);
        return v;
    };
    uint32_t nt = read_u32(5), np = read_u32(9);
    size_t expected = 13 + (size_t(nt) + np) * 48;
    if (bytes.size() != expected) throw fail("length mismatch");
    size_t pos = 13;
    auto read_d = [&]() {
        uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= uint64_t(bytes[pos + i]) << (8 * i);
        pos += 8;
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    };
    DiscrepancyCloud cloud;
    for (auto* side : {&cloud.target_points, &cloud.pred_points}) {
        uint32_t n = side == &cloud.target_points ? nt : np;
        side->reserve(n);
        for (uint32_t i = 0; i < n; ++i) {
            FeaturePoint fp;
            for (int k = 0; k < 3; ++k) fp.position[k] = read_d();
            for (int k = 0; k < 3; ++k) fp.offset[k] = read_d();
            side->push_back(fp);
        }
    }
    return cloud;
}

std::string serialize_cloud_json(const DiscrepancyCloud& cloud) {
    nlohmann::json j;
    auto encode = [](const std::vector<FeaturePoint>& side) {
        nlohmann::json arr = nlohmann::json::array();
        for (const FeaturePoint& fp : side)
            arr.push_back({fp.position.x, fp.position.y, fp.position.z, fp.offset.x, fp.offset.y,
                           fp.offset.z});
        return arr;
    };
    j["format"] = "DCLD1";
    j["target_points"] = encode(cloud.target_points);
    j["pred_points"] = encode(cloud.pred_points);
    return j.dump();
}

DiscrepancyCloud parse_cloud_json(const std::string& text) {
    auto fail = [](const char* why) -> Error {
        return Error(ErrorCode::corrupt_payload, std::string("discrepancy cloud json: ") + why);
    };
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded()) throw fail("not valid json");
    if (!j.contains("format") || j["format"] != "DCLD1") throw fail("bad format tag");
    auto decode = [&](const char* key) {
        if (!j.contains(key) || !j[key].is_array()) throw fail("missing side array");
        std::vector<FeaturePoint> side;
        for (const auto& row : j[key]) {
            if (!row.is_array() || row.size() != 6) throw fail("feature row is not 6 numbers");
            FeaturePoint fp;
            for (int k = 0; k < 3; ++k) fp.position[k] = row[k].get<double>();
            for (int k = 0; k < 3; ++k) fp.offset[k] = row[k + 3].get<double>();
            side.push_back(fp);
        }
        return side;
    };
    DiscrepancyCloud cloud{decode("target_points"), decode("pred_points")};
    return cloud;
}

}  // namespace cadloop
