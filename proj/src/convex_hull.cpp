#include <cadloop/convex_hull.hpp>
#include <cadloop/error.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

namespace cadloop {
namespace {

struct Face {
    std::array<uint32_t, 3> v;
    std::array<int, 3> neighbor;  // across edge (v[i], v[(i+1)%3])
    Vec3 normal;
    double offset = 0.0;  // plane: dot(normal, x) = offset
    std::vector<uint32_t> conflicts;
    uint32_t farthest = 0;
    double farthest_dist = 0.0;
    bool alive = true;

    double dist(const Vec3& p) const { return dot(normal, p) - offset; }
};

struct HorizonEdge {
    uint32_t a, b;            // directed as seen from the visible side
    int outside_face;         // surviving face across the edge
    int outside_edge;         // its edge slot (b, a)
};

class Builder {
  public:
    explicit Builder(const std::vector<Vec3>& points) : pts_(points), done_(points.size(), 0) {
        Vec3 lo{std::numeric_limits<double>::max(), std::numeric_limits<double>::max(),
                std::numeric_limits<double>::max()};
        Vec3 hi = -lo;
        for (const Vec3& p : pts_) {
            lo = min_components(lo, p);
            hi = max_components(hi, p);
        }
        double span = std::max({hi.x - lo.x, hi.y - lo.y, hi.z - lo.z, 0.0});
        eps_ = std::max(1e-12, span * 1e-9);
    }

    void run() {
        initial_simplex();
        std::vector<int> pending;
        for (int fi = 0; fi < int(faces_.size()); ++fi)
            if (!faces_[fi].conflicts.empty()) pending.push_back(fi);

        while (!pending.empty()) {
            int fi = pending.back();
            pending.pop_back();
            if (!faces_[fi].alive) continue;
            refresh_farthest(fi);
            if (faces_[fi].conflicts.empty()) continue;
            uint32_t apex = faces_[fi].farthest;

            std::vector<int> visible;
            std::vector<HorizonEdge> horizon;
            if (!collect_horizon(fi, pts_[apex], visible, horizon)) {
                // Pinched horizon: leave the hull as-is and drop the apex.
                done_[apex] = 1;
                pending.push_back(fi);
                continue;
            }

            done_[apex] = 1;
            std::vector<uint32_t> orphans;
            for (int vi : visible) {
                faces_[vi].alive = false;
                for (uint32_t p : faces_[vi].conflicts)
                    if (!done_[p]) orphans.push_back(p);
                faces_[vi].conflicts.clear();
                faces_[vi].conflicts.shrink_to_fit();
            }

            std::vector<int> created;
            created.reserve(horizon.size());
            std::unordered_map<uint32_t, int> by_start, by_end;
            for (const HorizonEdge& he : horizon) {
                int nf = make_face(he.a, he.b, apex);
                faces_[nf].neighbor[0] = he.outside_face;
                faces_[he.outside_face].neighbor[he.outside_edge] = nf;
                by_start[he.a] = nf;
                by_end[he.b] = nf;
                created.push_back(nf);
            }
            for (int nf : created) {
                faces_[nf].neighbor[1] = by_start.at(faces_[nf].v[1]);  // edge (b, apex)
                faces_[nf].neighbor[2] = by_end.at(faces_[nf].v[0]);    // edge (apex, a)
            }

            for (uint32_t p : orphans) {
                int best_face = -1;
                double best_d = eps_;
                for (int nf : created) {
                    double d = faces_[nf].dist(pts_[p]);
                    if (d > best_d) {
                        best_d = d;
                        best_face = nf;
                    }
                }
                if (best_face >= 0) add_conflict(best_face, p);
            }
            for (int nf : created)
                if (!faces_[nf].conflicts.empty()) pending.push_back(nf);
        }
    }

    HullResult result() const {
        HullResult out;
        std::vector<char> on_hull(pts_.size(), 0);
        for (const Face& f : faces_) {
            if (!f.alive) continue;
            out.faces.push_back(f.v);
            for (uint32_t v : f.v) on_hull[v] = 1;
        }
        for (size_t i = 0; i < pts_.size(); ++i)
            if (on_hull[i]) out.vertices.push_back(i);
        return out;
    }

  private:
    int make_face(uint32_t a, uint32_t b, uint32_t c) {
        Face f;
        f.v = {a, b, c};
        f.neighbor = {-1, -1, -1};
        Vec3 n = cross(pts_[b] - pts_[a], pts_[c] - pts_[a]);
        double len = length(n);
        // Sliver faces keep a zero normal; they attract no conflict points.
        f.normal = len > 0.0 ? n / len : Vec3{0, 0, 0};
        f.offset = dot(f.normal, pts_[a]);
        faces_.push_back(std::move(f));
        mark_.push_back(0);
        return int(faces_.size()) - 1;
    }

    void add_conflict(int fi, uint32_t p) {
        Face& f = faces_[fi];
        double d = f.dist(pts_[p]);
        if (d <= eps_) return;
        f.conflicts.push_back(p);
        if (d > f.farthest_dist) {
            f.farthest_dist = d;
            f.farthest = p;
        }
    }

    void refresh_farthest(int fi) {
        Face& f = faces_[fi];
        std::vector<uint32_t> keep;
        keep.reserve(f.conflicts.size());
        f.farthest_dist = 0.0;
        for (uint32_t p : f.conflicts) {
            if (done_[p]) continue;
            double d = f.dist(pts_[p]);
            if (d <= eps_) continue;
            keep.push_back(p);
            if (d > f.farthest_dist) {
                f.farthest_dist = d;
                f.farthest = p;
            }
        }
        f.conflicts = std::move(keep);
    }

    // BFS over faces visible from `ap`, collecting the horizon loop. Returns
    // false (leaving the hull untouched) when the horizon is not a simple
    // cycle, which happens for near-degenerate inputs.
    bool collect_horizon(int start, const Vec3& ap, std::vector<int>& visible,
                         std::vector<HorizonEdge>& horizon) {
        ++epoch_;
        visible.push_back(start);
        mark_[start] = epoch_;
        for (size_t k = 0; k < visible.size(); ++k) {
            int cur = visible[k];
            for (int e = 0; e < 3; ++e) {
                int nb = faces_[cur].neighbor[e];
                if (nb < 0) throw Error(ErrorCode::degenerate_hull, "open hull topology");
                if (mark_[nb] == epoch_) continue;
                if (faces_[nb].dist(ap) > eps_) {
                    mark_[nb] = epoch_;
                    visible.push_back(nb);
                } else {
                    uint32_t u = faces_[cur].v[e], w = faces_[cur].v[(e + 1) % 3];
                    int back = edge_index(nb, w, u);
                    if (back < 0) throw Error(ErrorCode::degenerate_hull, "inconsistent adjacency");
                    horizon.push_back({u, w, nb, back});
                }
            }
        }
        // A valid horizon is one closed loop: starts and ends each unique.
        std::unordered_map<uint32_t, int> starts, ends;
        for (const HorizonEdge& he : horizon) {
            if (++starts[he.a] > 1 || ++ends[he.b] > 1) return false;
        }
        for (const auto& [vertex, count] : starts)
            if (!ends.count(vertex)) return false;
        return true;
    }

    int edge_index(int fi, uint32_t a, uint32_t b) const {
        for (int e = 0; e < 3; ++e)
            if (faces_[fi].v[e] == a && faces_[fi].v[(e + 1) % 3] == b) return e;
        return -1;
    }

    void initial_simplex() {
        const size_t n = pts_.size();
        if (n < 4) throw Error(ErrorCode::degenerate_hull, "need at least 4 points");
        uint32_t i0 = 0;
        for (uint32_t i = 1; i < n; ++i)
            if (pts_[i].x < pts_[i0].x) i0 = i;
        uint32_t i1 = i0;
        double best = -1.0;
        for (uint32_t i = 0; i < n; ++i) {
            double d = length_squared(pts_[i] - pts_[i0]);
            if (d > best) {
                best = d;
                i1 = i;
            }
        }
        if (std::sqrt(std::max(best, 0.0)) <= eps_)
            throw Error(ErrorCode::degenerate_hull, "all points coincident");
        Vec3 axis = pts_[i1] - pts_[i0];
        uint32_t i2 = i0;
        best = -1.0;
        for (uint32_t i = 0; i < n; ++i) {
            double d = length_squared(cross(axis, pts_[i] - pts_[i0]));
            if (d > best) {
                best = d;
                i2 = i;
            }
        }
        if (std::sqrt(std::max(best, 0.0)) / length(axis) <= eps_)
            throw Error(ErrorCode::degenerate_hull, "all points collinear");
        Vec3 pn = normalized(cross(axis, pts_[i2] - pts_[i0]));
        uint32_t i3 = i0;
        best = -1.0;
        for (uint32_t i = 0; i < n; ++i) {
            double d = std::abs(dot(pn, pts_[i] - pts_[i0]));
            if (d > best) {
                best = d;
                i3 = i;
            }
        }
        if (best <= eps_) throw Error(ErrorCode::degenerate_hull, "all points coplanar");

        Vec3 centroid = (pts_[i0] + pts_[i1] + pts_[i2] + pts_[i3]) / 4.0;
        const std::array<std::array<uint32_t, 3>, 4> tris = {
            {{i0, i1, i2}, {i0, i1, i3}, {i0, i2, i3}, {i1, i2, i3}}};
        for (auto t : tris) {
            int fi = make_face(t[0], t[1], t[2]);
            if (faces_[fi].dist(centroid) > 0.0) {
                std::swap(faces_[fi].v[1], faces_[fi].v[2]);
                faces_[fi].normal = -faces_[fi].normal;
                faces_[fi].offset = dot(faces_[fi].normal, pts_[faces_[fi].v[0]]);
            }
        }
        for (int a = 0; a < 4; ++a)
            for (int e = 0; e < 3; ++e) {
                uint32_t u = faces_[a].v[e], w = faces_[a].v[(e + 1) % 3];
                for (int b = 0; b < 4; ++b) {
                    if (a == b) continue;
                    if (edge_index(b, w, u) >= 0) faces_[a].neighbor[e] = b;
                }
            }
        done_[i0] = done_[i1] = done_[i2] = done_[i3] = 1;
        for (uint32_t i = 0; i < uint32_t(n); ++i) {
            if (done_[i]) continue;
            int best_face = -1;
            double best_d = eps_;
            for (int fi = 0; fi < 4; ++fi) {
                double d = faces_[fi].dist(pts_[i]);
                if (d > best_d) {
                    best_d = d;
                    best_face = fi;
                }
            }
            if (best_face >= 0) add_conflict(best_face, i);
        }
    }

    const std::vector<Vec3>& pts_;
    double eps_;
    std::vector<Face> faces_;
    std::vector<uint32_t> mark_;
    uint32_t epoch_ = 0;
    std::vector<char> done_;
};

}  // namespace

HullResult convex_hull(const std::vector<Vec3>& points) {
    Builder b(points);
    b.run();
    return b.result();
}

std::vector<size_t> convex_hull_vertices(const std::vector<Vec3>& points) {
    return convex_hull(points).vertices;
}

}  // namespace cadloop
