#pragma once

#include <array>
#include <string>
#include <vector>

#include "cadloop/error.hpp"
#include "cadloop/geom.hpp"
#include "cadloop/mesh.hpp"

// Mini sketch-extrude CAD language. Grammar reference: docs/dsl.md.
// Programs are UTF-8 text, '#' starts a line comment, files use ".cadl".
// All coordinates live in the fixed modeling domain [-100,100]^3.

namespace cadloop::dsl {

enum class Plane { xy, xz, yz };
enum class Combine { new_solid, union_op, cut, intersect };
enum class PrimitiveKind { rect, circle, polygon };
enum class PrimitiveTag { add, subtract };

/// One signed 2D sketch primitive. Field use by kind:
///   rect: cx, cy, w, h   circle: cx, cy, r   polygon: vertices
struct Primitive {
    PrimitiveKind kind = PrimitiveKind::rect;
    PrimitiveTag tag = PrimitiveTag::add;
    double cx = 0.0, cy = 0.0;
    double w = 0.0, h = 0.0;
    double r = 0.0;
    std::vector<std::array<double, 2>> vertices;

    bool operator==(const Primitive& o) const;
};

/// Sketch extrusion along the axis normal to `plane`. The slab is centered at
/// `offset` with thickness `height`: axis in [offset - height/2, offset + height/2].
struct Step {
    Plane plane = Plane::xy;
    double offset = 0.0;
    double height = 0.0;
    Combine combine = Combine::new_solid;
    std::vector<Primitive> sketch;

    bool operator==(const Step& o) const;
};

struct Ast {
    std::vector<Step> steps;

    bool operator==(const Ast& o) const { return steps == o.steps; }
};

/// Total classification of a program text: exactly one reason applies.
struct ValidityReport {
    bool valid = false;
    enum class Reason { ok, parse_error, range_error, degenerate_solid } reason = Reason::parse_error;
    std::string detail;
};

const char* plane_name(Plane plane);
const char* combine_name(Combine combine);

/// Throws ParseError (with line/col) on syntax problems and Error(range_error)
/// on out-of-domain literals or violated shape invariants.
Ast parse(const std::string& text);

/// Canonical formatting: one primitive per line, explicit combine on every
/// step, numbers printed with trailing-zero trimming. parse(print(a)) == a.
std::string print(const Ast& ast);

/// Re-checks Ast invariants (first-step combine, literal domain, positive
/// dimensions, polygon non-collinearity). Throws Error(range_error).
void validate(const Ast& ast);

/// Approximate signed distance, negative inside. Primitives use exact 2D SDFs
/// extruded by max(sdf2d, |axis - offset| - height/2); add/sub fold min /
/// max(a,-b); steps fold union=min, cut=max(a,-b), intersect=max, new=replace.
double evaluate_sdf(const Ast& ast, const Vec3& p);

/// True when the node grid over [-100,100]^3 sees both signs;
/// render_mesh succeeds exactly when this holds.
bool has_sign_change(const Ast& ast, int grid_resolution);

/// Marching cubes over [-100,100]^3. Throws DegenerateSolid when the field
/// has no sign change on the grid, RangeError for invalid resolution/Ast.
TriangleMesh render_mesh(const Ast& ast, int grid_resolution = 128);

/// Deterministic procedural generator; complexity = step count in [1,8].
/// Retries degenerate draws internally (cap 10, then GenerationExhausted).
Ast random_program(uint64_t seed, int complexity);

/// Scales every numeric by (1 + u*magnitude), u ~ U[-1,1]; with probability
/// magnitude/2 drops one primitive (keeping >= 1 per sketch) or flips one
/// non-first combine flag. Output is clamped back to the literal domain.
Ast perturb_program(const Ast& ast, double magnitude, uint64_t seed);

/// parse + validate + degeneracy check, mapped onto the single-reason report.
ValidityReport classify_program(const std::string& text, int grid_resolution = 128);

}  // namespace cadloop::dsl
