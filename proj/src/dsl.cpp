#include "cadloop/dsl.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <sstream>

#include "cadloop/marching_cubes.hpp"
#include "cadloop/util.hpp"

namespace cadloop::dsl {

namespace {

constexpr double kDomain = 100.0;  // modeling domain is [-100,100]^3

// ---------------------------------------------------------------- lexer

struct Token {
    enum class Kind { ident, number, equals, lbrace, rbrace, end };
    Kind kind = Kind::end;
    std::string text;
    double value = 0.0;
    int line = 1;
    int col = 1;
};

class Lexer {
public:
    explicit Lexer(const std::string& text) : text_(text) { advance(); }

    const Token& peek() const { return current_; }

    Token take() {
        Token t = current_;
        advance();
        return t;
    }

private:
    void advance() {
        skip_space_and_comments();
        current_.line = line_;
        current_.col = col_;
        if (pos_ >= text_.size()) {
            current_.kind = Token::Kind::end;
            current_.text = "<end of program>";
            return;
        }
        const char c = text_[pos_];
        if (c == '=') {
            current_ = make_simple(Token::Kind::equals, "=");
        } else if (c == '{') {
            current_ = make_simple(Token::Kind::lbrace, "{");
        } else if (c == '}') {
            current_ = make_simple(Token::Kind::rbrace, "}");
        } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            size_t start = pos_;
            while (pos_ < text_.size() &&
                   (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
                bump();
            }
            current_.kind = Token::Kind::ident;
            current_.text = text_.substr(start, pos_ - start);
        } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.') {
            lex_number();
        } else {
            throw ParseError(line_, col_, std::string("unexpected character '") + c + "'");
        }
    }

    Token make_simple(Token::Kind kind, const char* text) {
        Token t;
        t.kind = kind;
        t.text = text;
        t.line = line_;
        t.col = col_;
        bump();
        return t;
    }

    void lex_number() {
        const size_t start = pos_;
        const int line = line_, col = col_;
        if (text_[pos_] == '-' || text_[pos_] == '+') bump();
        size_t digits = 0;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
            bump();
            ++digits;
        }
        if (pos_ < text_.size() && text_[pos_] == '.') {
            bump();
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
                bump();
                ++digits;
            }
        }
        if (digits == 0) throw ParseError(line, col, "malformed number");
        if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
            bump();
            if (pos_ < text_.size() && (text_[pos_] == '-' || text_[pos_] == '+')) bump();
            size_t exp_digits = 0;
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
                bump();
                ++exp_digits;
            }
            if (exp_digits == 0) throw ParseError(line, col, "malformed exponent");
        }
        const std::string body = text_.substr(start, pos_ - start);
        current_.kind = Token::Kind::number;
        current_.text = body;
        current_.value = std::strtod(body.c_str(), nullptr);
        current_.line = line;
        current_.col = col;
    }

    void skip_space_and_comments() {
        while (pos_ < text_.size()) {
            const char c = text_[pos_];
            if (c == '#') {
                while (pos_ < text_.size() && text_[pos_] != '\n') bump();
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                bump();
            } else {
                break;
            }
        }
    }

    void bump() {
        if (text_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    const std::string& text_;
    size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
    Token current_;
};

// ---------------------------------------------------------------- parser

[[noreturn]] void range_fail(int line, int col, const std::string& message) {
    throw Error(ErrorCode::range_error,
                "line " + std::to_string(line) + ", col " + std::to_string(col) + ": " + message);
}

void check_coord(double v, int line, int col, const char* what) {
    if (!std::isfinite(v) || v < -kDomain || v > kDomain)
        range_fail(line, col, std::string(what) + " must lie in [-100,100], got " + format_number(v));
}

void check_dim(double v, int line, int col, const char* what) {
    if (!std::isfinite(v) || v <= 0.0 || v > kDomain)
        range_fail(line, col, std::string(what) + " must lie in (0,100], got " + format_number(v));
}

bool vertices_non_collinear(const std::vector<std::array<double, 2>>& v) {
    if (v.size() < 3) return false;
    for (size_t i = 1; i < v.size(); ++i) {
        const double ax = v[i][0] - v[0][0];
        const double ay = v[i][1] - v[0][1];
        if (ax * ax + ay * ay < 1e-18) continue;
        for (size_t j = i + 1; j < v.size(); ++j) {
            const double bx = v[j][0] - v[0][0];
            const double by = v[j][1] - v[0][1];
            if (std::abs(ax * by - ay * bx) > 1e-9) return true;
        }
        return false;  // all later vertices sit on the v0->vi line
    }
    return false;
}

class Parser {
public:
    explicit Parser(const std::string& text) : lex_(text) {}

    Ast parse_program() {
        Ast ast;
        if (lex_.peek().kind == Token::Kind::end) {
            throw ParseError(lex_.peek().line, lex_.peek().col,
                             "expected 'extrude', got end of program");
        }
        while (lex_.peek().kind != Token::Kind::end) {
            ast.steps.push_back(parse_step(ast.steps.empty()));
        }
        return ast;
    }

private:
    Token expect(Token::Kind kind, const char* what) {
        Token t = lex_.take();
        if (t.kind != kind)
            throw ParseError(t.line, t.col, std::string("expected ") + what + ", got '" + t.text + "'");
        return t;
    }

    Token expect_keyword(const char* kw) {
        Token t = lex_.take();
        if (t.kind != Token::Kind::ident || t.text != kw)
            throw ParseError(t.line, t.col,
                             std::string("expected '") + kw + "', got '" + t.text + "'");
        return t;
    }

    Token expect_key_value_number(const char* key) {
        expect_keyword(key);
        expect(Token::Kind::equals, "'='");
        return expect(Token::Kind::number, "a number");
    }

    Step parse_step(bool is_first) {
        expect_keyword("extrude");
        Step step;

        expect_keyword("plane");
        expect(Token::Kind::equals, "'='");
        const Token plane = expect(Token::Kind::ident, "a plane name (XY, XZ, YZ)");
        if (plane.text == "XY") step.plane = Plane::xy;
        else if (plane.text == "XZ") step.plane = Plane::xz;
        else if (plane.text == "YZ") step.plane = Plane::yz;
        else throw ParseError(plane.line, plane.col, "unknown plane '" + plane.text + "'");

        const Token z0 = expect_key_value_number("z0");
        check_coord(z0.value, z0.line, z0.col, "z0");
        step.offset = z0.value;

        const Token h = expect_key_value_number("h");
        check_dim(h.value, h.line, h.col, "h");
        step.height = h.value;

        step.combine = is_first ? Combine::new_solid : Combine::union_op;
        if (lex_.peek().kind == Token::Kind::ident && lex_.peek().text == "combine") {
            lex_.take();
            expect(Token::Kind::equals, "'='");
            const Token c = expect(Token::Kind::ident, "a combine mode");
            if (c.text == "new") step.combine = Combine::new_solid;
            else if (c.text == "union") step.combine = Combine::union_op;
            else if (c.text == "cut") step.combine = Combine::cut;
            else if (c.text == "intersect") step.combine = Combine::intersect;
            else throw ParseError(c.line, c.col, "unknown combine mode '" + c.text + "'");
            if (is_first && step.combine != Combine::new_solid)
                throw ParseError(c.line, c.col, "first step must use combine=new");
        }

        expect(Token::Kind::lbrace, "'{'");
        while (lex_.peek().kind != Token::Kind::rbrace) {
            step.sketch.push_back(parse_primitive());
        }
        const Token rb = lex_.take();
        if (step.sketch.empty())
            throw ParseError(rb.line, rb.col, "sketch must contain at least one primitive");
        return step;
    }

    Primitive parse_primitive() {
        const Token tag = expect(Token::Kind::ident, "'add' or 'sub'");
        Primitive prim;
        if (tag.text == "add") prim.tag = PrimitiveTag::add;
        else if (tag.text == "sub") prim.tag = PrimitiveTag::subtract;
        else throw ParseError(tag.line, tag.col, "expected 'add' or 'sub', got '" + tag.text + "'");

        const Token shape = expect(Token::Kind::ident, "a shape (rect, circle, polygon)");
        if (shape.text == "rect") {
            prim.kind = PrimitiveKind::rect;
            Token t = expect(Token::Kind::number, "rect cx");
            check_coord(t.value, t.line, t.col, "rect cx");
            prim.cx = t.value;
            t = expect(Token::Kind::number, "rect cy");
            check_coord(t.value, t.line, t.col, "rect cy");
            prim.cy = t.value;
            t = expect(Token::Kind::number, "rect w");
            check_dim(t.value, t.line, t.col, "rect w");
            prim.w = t.value;
            t = expect(Token::Kind::number, "rect h");
            check_dim(t.value, t.line, t.col, "rect h");
            prim.h = t.value;
        } else if (shape.text == "circle") {
            prim.kind = PrimitiveKind::circle;
            Token t = expect(Token::Kind::number, "circle cx");
            check_coord(t.value, t.line, t.col, "circle cx");
            prim.cx = t.value;
            t = expect(Token::Kind::number, "circle cy");
            check_coord(t.value, t.line, t.col, "circle cy");
            prim.cy = t.value;
            t = expect(Token::Kind::number, "circle r");
            check_dim(t.value, t.line, t.col, "circle r");
            prim.r = t.value;
        } else if (shape.text == "polygon") {
            prim.kind = PrimitiveKind::polygon;
            while (lex_.peek().kind == Token::Kind::number) {
                Token tx = lex_.take();
                check_coord(tx.value, tx.line, tx.col, "polygon x");
                if (lex_.peek().kind != Token::Kind::number)
                    throw ParseError(lex_.peek().line, lex_.peek().col,
                                     "polygon coordinates must come in x y pairs");
                Token ty = lex_.take();
                check_coord(ty.value, ty.line, ty.col, "polygon y");
                prim.vertices.push_back({tx.value, ty.value});
            }
            if (prim.vertices.size() < 3)
                range_fail(shape.line, shape.col, "polygon needs at least 3 vertices");
            if (!vertices_non_collinear(prim.vertices))
                range_fail(shape.line, shape.col, "polygon vertices are collinear");
        } else {
            throw ParseError(shape.line, shape.col, "unknown shape '" + shape.text + "'");
        }
        return prim;
    }

    Lexer lex_;
};

// ------------------------------------------------------------- 2D SDFs

double rect_sdf(const Primitive& p, double u, double v) {
    const double dx = std::abs(u - p.cx) - 0.5 * p.w;
    const double dy = std::abs(v - p.cy) - 0.5 * p.h;
    const double ox = std::max(dx, 0.0);
    const double oy = std::max(dy, 0.0);
    return std::sqrt(ox * ox + oy * oy) + std::min(std::max(dx, dy), 0.0);
}

double circle_sdf(const Primitive& p, double u, double v) {
    const double dx = u - p.cx;
    const double dy = v - p.cy;
    return std::sqrt(dx * dx + dy * dy) - p.r;
}

double polygon_sdf(const Primitive& p, double u, double v) {
    const auto& vs = p.vertices;
    const size_t n = vs.size();
    double d = (u - vs[0][0]) * (u - vs[0][0]) + (v - vs[0][1]) * (v - vs[0][1]);
    double s = 1.0;
    for (size_t i = 0, j = n - 1; i < n; j = i++) {
        const double ex = vs[j][0] - vs[i][0];
        const double ey = vs[j][1] - vs[i][1];
        const double wx = u - vs[i][0];
        const double wy = v - vs[i][1];
        const double ee = ex * ex + ey * ey;
        const double t = ee > 0.0 ? std::clamp((wx * ex + wy * ey) / ee, 0.0, 1.0) : 0.0;
        const double bx = wx - ex * t;
        const double by = wy - ey * t;
        d = std::min(d, bx * bx + by * by);
        const bool c0 = v >= vs[i][1];
        const bool c1 = v < vs[j][1];
        const bool c2 = ex * wy > ey * wx;
        if ((c0 && c1 && c2) || (!c0 && !c1 && !c2)) s = -s;
    }
    return s * std::sqrt(d);
}

double primitive_sdf(const Primitive& p, double u, double v) {
    switch (p.kind) {
        case PrimitiveKind::rect: return rect_sdf(p, u, v);
        case PrimitiveKind::circle: return circle_sdf(p, u, v);
        case PrimitiveKind::polygon: return polygon_sdf(p, u, v);
    }
    return std::numeric_limits<double>::infinity();
}

double sketch_sdf(const Step& step, double u, double v) {
    double d = std::numeric_limits<double>::infinity();
    for (const Primitive& p : step.sketch) {
        const double s = primitive_sdf(p, u, v);
        d = p.tag == PrimitiveTag::add ? std::min(d, s) : std::max(d, -s);
    }
    return d;
}

// Sketch-plane coordinates of a 3D point plus the extrusion-axis coordinate.
void plane_coords(Plane plane, const Vec3& p, double& u, double& v, double& axis) {
    switch (plane) {
        case Plane::xy: u = p.x; v = p.y; axis = p.z; break;
        case Plane::xz: u = p.x; v = p.z; axis = p.y; break;
        case Plane::yz: u = p.y; v = p.z; axis = p.x; break;
    }
}

double step_sdf(const Step& step, const Vec3& p) {
    double u, v, axis;
    plane_coords(step.plane, p, u, v, axis);
    const double slab = std::abs(axis - step.offset) - 0.5 * step.height;
    return std::max(sketch_sdf(step, u, v), slab);
}

double combine_fold(Combine combine, double acc, double s) {
    switch (combine) {
        case Combine::new_solid: return s;
        case Combine::union_op: return std::min(acc, s);
        case Combine::cut: return std::max(acc, -s);
        case Combine::intersect: return std::max(acc, s);
    }
    return acc;
}

// ------------------------------------------------------- grid evaluation

/// Fills SDF values on the (res+1)^3 node lattice of [-100,100]^3. Per step,
/// the 2D sketch field is evaluated once per plane cell and swept along the
/// extrusion axis; results are bit-identical to evaluate_sdf at each node.
std::vector<double> evaluate_grid(const Ast& ast, int res) {
    const int n = res + 1;
    const double cell = 2.0 * kDomain / res;
    std::vector<double> coords(n);
    for (int i = 0; i < n; ++i) coords[i] = -kDomain + cell * i;

    std::vector<double> values(static_cast<size_t>(n) * n * n,
                               std::numeric_limits<double>::infinity());
    std::vector<double> table(static_cast<size_t>(n) * n);

    for (const Step& step : ast.steps) {
        for (int b = 0; b < n; ++b)
            for (int a = 0; a < n; ++a)
                table[static_cast<size_t>(a) + static_cast<size_t>(n) * b] =
                    sketch_sdf(step, coords[a], coords[b]);

        const double half = 0.5 * step.height;
        size_t idx = 0;
        for (int k = 0; k < n; ++k) {
            for (int j = 0; j < n; ++j) {
                for (int i = 0; i < n; ++i, ++idx) {
                    double sdf2, axis;
                    switch (step.plane) {
                        case Plane::xy:
                            sdf2 = table[static_cast<size_t>(i) + static_cast<size_t>(n) * j];
                            axis = coords[k];
                            break;
                        case Plane::xz:
                            sdf2 = table[static_cast<size_t>(i) + static_cast<size_t>(n) * k];
                            axis = coords[j];
                            break;
                        default:
                            sdf2 = table[static_cast<size_t>(j) + static_cast<size_t>(n) * k];
                            axis = coords[i];
                            break;
                    }
                    const double s = std::max(sdf2, std::abs(axis - step.offset) - half);
                    values[idx] = combine_fold(step.combine, values[idx], s);
                }
            }
        }
    }
    return values;
}

}  // namespace

// ------------------------------------------------------------ public API

bool Primitive::operator==(const Primitive& o) const {
    return kind == o.kind && tag == o.tag && cx == o.cx && cy == o.cy && w == o.w && h == o.h &&
           r == o.r && vertices == o.vertices;
}

bool Step::operator==(const Step& o) const {
    return plane == o.plane && offset == o.offset && height == o.height && combine == o.combine &&
           sketch == o.sketch;
}

const char* plane_name(Plane plane) {
    switch (plane) {
        case Plane::xy: return "XY";
        case Plane::xz: return "XZ";
        default: return "YZ";
    }
}

const char* combine_name(Combine combine) {
    switch (combine) {
        case Combine::new_solid: return "new";
        case Combine::union_op: return "union";
        case Combine::cut: return "cut";
        default: return "intersect";
    }
}

Ast parse(const std::string& text) { return Parser(text).parse_program(); }

std::string print(const Ast& ast) {
    std::ostringstream out;
    for (const Step& step : ast.steps) {
        out << "extrude plane=" << plane_name(step.plane) << " z0=" << format_number(step.offset)
            << " h=" << format_number(step.height) << " combine=" << combine_name(step.combine)
            << " {\n";
        for (const Primitive& prim : step.sketch) {
            out << "  " << (prim.tag == PrimitiveTag::add ? "add" : "sub") << ' ';
            switch (prim.kind) {
                case PrimitiveKind::rect:
                    out << "rect " << format_number(prim.cx) << ' ' << format_number(prim.cy) << ' '
                        << format_number(prim.w) << ' ' << format_number(prim.h);
                    break;
                case PrimitiveKind::circle:
                    out << "circle " << format_number(prim.cx) << ' ' << format_number(prim.cy)
                        << ' ' << format_number(prim.r);
                    break;
                case PrimitiveKind::polygon:
                    out << "polygon";
                    for (const auto& v : prim.vertices)
                        out << ' ' << format_number(v[0]) << ' ' << format_number(v[1]);
                    break;
            }
            out << '\n';
        }
        out << "}\n";
    }
    return out.str();
}

void validate(const Ast& ast) {
    if (ast.steps.empty()) throw Error(ErrorCode::range_error, "program has no steps");
    for (size_t si = 0; si < ast.steps.size(); ++si) {
        const Step& step = ast.steps[si];
        if (si == 0 && step.combine != Combine::new_solid)
            throw Error(ErrorCode::range_error, "first step must use combine=new");
        check_coord(step.offset, 0, 0, "z0");
        check_dim(step.height, 0, 0, "h");
        if (step.sketch.empty())
            throw Error(ErrorCode::range_error, "sketch must contain at least one primitive");
        for (const Primitive& prim : step.sketch) {
            switch (prim.kind) {
                case PrimitiveKind::rect:
                    check_coord(prim.cx, 0, 0, "rect cx");
                    check_coord(prim.cy, 0, 0, "rect cy");
                    check_dim(prim.w, 0, 0, "rect w");
                    check_dim(prim.h, 0, 0, "rect h");
                    break;
                case PrimitiveKind::circle:
                    check_coord(prim.cx, 0, 0, "circle cx");
                    check_coord(prim.cy, 0, 0, "circle cy");
                    check_dim(prim.r, 0, 0, "circle r");
                    break;
                case PrimitiveKind::polygon:
                    for (const auto& v : prim.vertices) {
                        check_coord(v[0], 0, 0, "polygon x");
                        check_coord(v[1], 0, 0, "polygon y");
                    }
                    if (prim.vertices.size() < 3)
                        throw Error(ErrorCode::range_error, "polygon needs at least 3 vertices");
                    if (!vertices_non_collinear(prim.vertices))
                        throw Error(ErrorCode::range_error, "polygon vertices are collinear");
                    break;
            }
        }
    }
}

double evaluate_sdf(const Ast& ast, const Vec3& p) {
    double acc = std::numeric_limits<double>::infinity();
    for (const Step& step : ast.steps) acc = combine_fold(step.combine, acc, step_sdf(step, p));
    return acc;
}

bool has_sign_change(const Ast& ast, int grid_resolution) {
    const std::vector<double> values = evaluate_grid(ast, grid_resolution);
    bool neg = false, pos = false;
    for (double v : values) {
        (v < 0.0 ? neg : pos) = true;
        if (neg && pos) return true;
    }
    return false;
}

TriangleMesh render_mesh(const Ast& ast, int grid_resolution) {
    if (grid_resolution < 32 || grid_resolution > 256)
        throw Error(ErrorCode::range_error,
                    "grid_resolution must lie in [32,256], got " + std::to_string(grid_resolution));
    validate(ast);

    ScalarGrid grid;
    grid.cells = grid_resolution;
    grid.origin = Vec3{-kDomain, -kDomain, -kDomain};
    grid.cell_size = 2.0 * kDomain / grid_resolution;
    grid.values = evaluate_grid(ast, grid_resolution);

    bool neg = false, pos = false;
    for (double v : grid.values) {
        (v < 0.0 ? neg : pos) = true;
        if (neg && pos) break;
    }
    if (!neg)
        throw Error(ErrorCode::degenerate_solid, "program produces an empty solid");
    if (!pos)
        throw Error(ErrorCode::degenerate_solid, "solid fills the whole domain grid");

    TriangleMesh mesh = marching_cubes(grid);
    if (mesh.empty())
        throw Error(ErrorCode::degenerate_solid, "isosurface extraction produced no triangles");
    return mesh;
}

namespace {

double quantize(double v, double q) { return std::round(v / q) * q; }

// Drawn profiles stay geometrically inside |u|,|v| <= 95 so rendered solids
// never get clipped by the domain grid.
Primitive draw_primitive(Rng& rng, PrimitiveTag tag, double cx, double cy, double min_size,
                         double max_size) {
    Primitive prim;
    prim.tag = tag;
    const double kind_roll = rng.uniform();
    prim.cx = quantize(std::clamp(cx, -60.0, 60.0), 0.5);
    prim.cy = quantize(std::clamp(cy, -60.0, 60.0), 0.5);
    const double room_x = 2.0 * (95.0 - std::abs(prim.cx));
    const double room_y = 2.0 * (95.0 - std::abs(prim.cy));
    if (kind_roll < 0.45) {
        prim.kind = PrimitiveKind::rect;
        prim.w = quantize(std::min(rng.uniform(min_size, max_size), room_x), 0.5);
        prim.h = quantize(std::min(rng.uniform(min_size, max_size), room_y), 0.5);
    } else if (kind_roll < 0.8) {
        prim.kind = PrimitiveKind::circle;
        prim.r = quantize(std::min({rng.uniform(0.5 * min_size, 0.5 * max_size),
                                    0.5 * room_x, 0.5 * room_y}), 0.5);
    } else {
        prim.kind = PrimitiveKind::polygon;
        const int sides = static_cast<int>(rng.uniform_int(3, 6));
        const double base_r = rng.uniform(0.5 * min_size, 0.5 * max_size);
        const double phase = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
        for (int i = 0; i < sides; ++i) {
            const double ang = phase + 2.0 * 3.14159265358979323846 * i / sides;
            const double r = base_r * rng.uniform(0.75, 1.25);
            prim.vertices.push_back(
                {quantize(std::clamp(prim.cx + r * std::cos(ang), -95.0, 95.0), 0.01),
                 quantize(std::clamp(prim.cy + r * std::sin(ang), -95.0, 95.0), 0.01)});
        }
        // The center was only scratch for vertex placement; a polygon carries
        // no cx/cy, and unused fields must stay at defaults so that
        // parse(print(ast)) == ast.
        prim.cx = 0.0;
        prim.cy = 0.0;
    }
    return prim;
}

// Conservative outer bounds of a step's solid in 3D, for placing later cuts.
Aabb step_bounds(const Step& step) {
    double lo_u = 1e9, hi_u = -1e9, lo_v = 1e9, hi_v = -1e9;
    for (const Primitive& prim : step.sketch) {
        if (prim.tag != PrimitiveTag::add) continue;
        double u0, u1, v0, v1;
        switch (prim.kind) {
            case PrimitiveKind::rect:
                u0 = prim.cx - 0.5 * prim.w; u1 = prim.cx + 0.5 * prim.w;
                v0 = prim.cy - 0.5 * prim.h; v1 = prim.cy + 0.5 * prim.h;
                break;
            case PrimitiveKind::circle:
                u0 = prim.cx - prim.r; u1 = prim.cx + prim.r;
                v0 = prim.cy - prim.r; v1 = prim.cy + prim.r;
                break;
            default:
                u0 = v0 = 1e9; u1 = v1 = -1e9;
                for (const auto& vert : prim.vertices) {
                    u0 = std::min(u0, vert[0]); u1 = std::max(u1, vert[0]);
                    v0 = std::min(v0, vert[1]); v1 = std::max(v1, vert[1]);
                }
                break;
        }
        lo_u = std::min(lo_u, u0); hi_u = std::max(hi_u, u1);
        lo_v = std::min(lo_v, v0); hi_v = std::max(hi_v, v1);
    }
    const double a0 = step.offset - 0.5 * step.height;
    const double a1 = step.offset + 0.5 * step.height;
    Aabb box;
    switch (step.plane) {
        case Plane::xy: box = {{lo_u, lo_v, a0}, {hi_u, hi_v, a1}}; break;
        case Plane::xz: box = {{lo_u, a0, lo_v}, {hi_u, a1, hi_v}}; break;
        default: box = {{a0, lo_u, lo_v}, {a1, hi_u, hi_v}}; break;
    }
    return box;
}

Ast draw_program(Rng& rng, int complexity) {
    Ast ast;

    Step base;
    base.plane = static_cast<Plane>(rng.uniform_int(0, 2));
    base.combine = Combine::new_solid;
    base.height = quantize(rng.uniform(24.0, 80.0), 0.5);
    const double max_off = 95.0 - 0.5 * base.height;
    base.offset = quantize(rng.uniform(-std::min(25.0, max_off), std::min(25.0, max_off)), 0.5);
    base.sketch.push_back(draw_primitive(rng, PrimitiveTag::add, rng.uniform(-30.0, 30.0),
                                         rng.uniform(-30.0, 30.0), 24.0, 80.0));
    if (rng.coin(0.3)) {
        // Optional sketch-level hole through the base profile.
        const Primitive& outer = base.sketch[0];
        Primitive hole = draw_primitive(rng, PrimitiveTag::subtract, outer.cx, outer.cy, 6.0, 18.0);
        hole.vertices.clear();
        hole.kind = PrimitiveKind::circle;
        hole.w = 0.0;  // stale when the draw rolled a rect; circles carry only cx/cy/r
        hole.h = 0.0;
        if (hole.r <= 0.0) hole.r = 4.0;
        base.sketch.push_back(hole);
    }
    ast.steps.push_back(base);
    Aabb solid = step_bounds(base);

    for (int s = 1; s < complexity; ++s) {
        Step step;
        step.plane = static_cast<Plane>(rng.uniform_int(0, 2));
        const double roll = rng.uniform();
        const Vec3 c = solid.center();
        const Vec3 ext = solid.extent();
        const double min_ext = std::max(8.0, std::min({ext.x, ext.y, ext.z}));

        if (roll < 0.45) {
            step.combine = Combine::union_op;
            step.height = quantize(rng.uniform(16.0, 60.0), 0.5);
            const double reach = 95.0 - 0.5 * step.height;
            Vec3 center{rng.uniform(c.x - 0.7 * ext.x, c.x + 0.7 * ext.x),
                        rng.uniform(c.y - 0.7 * ext.y, c.y + 0.7 * ext.y),
                        rng.uniform(c.z - 0.7 * ext.z, c.z + 0.7 * ext.z)};
            double u, v, axis;
            plane_coords(step.plane, center, u, v, axis);
            step.offset = quantize(std::clamp(axis, -reach, reach), 0.5);
            step.sketch.push_back(draw_primitive(rng, PrimitiveTag::add, u, v, 16.0, 60.0));
            ast.steps.push_back(step);
            solid.expand(step_bounds(step));
        } else if (roll < 0.85) {
            step.combine = Combine::cut;
            const double size = std::max(6.0, 0.45 * min_ext);
            step.height = quantize(rng.uniform(0.6 * min_ext, 2.0 * min_ext), 0.5);
            step.height = std::clamp(step.height, 4.0, 100.0);
            Vec3 center{rng.uniform(c.x - 0.3 * ext.x, c.x + 0.3 * ext.x),
                        rng.uniform(c.y - 0.3 * ext.y, c.y + 0.3 * ext.y),
                        rng.uniform(c.z - 0.3 * ext.z, c.z + 0.3 * ext.z)};
            double u, v, axis;
            plane_coords(step.plane, center, u, v, axis);
            step.offset = quantize(std::clamp(axis, -95.0 + 0.5 * step.height,
                                              95.0 - 0.5 * step.height), 0.5);
            step.sketch.push_back(
                draw_primitive(rng, PrimitiveTag::add, u, v, 0.5 * size, size));
            ast.steps.push_back(step);
        } else {
            step.combine = Combine::intersect;
            // Keep the intersecting slab generous so most of the solid survives.
            step.height = quantize(std::clamp(1.4 * std::max({ext.x, ext.y, ext.z}), 20.0, 100.0), 0.5);
            double u, v, axis;
            plane_coords(step.plane, c, u, v, axis);
            step.offset = quantize(std::clamp(axis, -95.0 + 0.5 * step.height,
                                              95.0 - 0.5 * step.height), 0.5);
            Primitive prim;
            prim.tag = PrimitiveTag::add;
            prim.kind = rng.coin(0.5) ? PrimitiveKind::rect : PrimitiveKind::circle;
            prim.cx = quantize(std::clamp(u + rng.uniform(-4.0, 4.0), -90.0, 90.0), 0.5);
            prim.cy = quantize(std::clamp(v + rng.uniform(-4.0, 4.0), -90.0, 90.0), 0.5);
            const double span = 1.3 * std::max({ext.x, ext.y, ext.z});
            if (prim.kind == PrimitiveKind::rect) {
                prim.w = quantize(std::clamp(span * rng.uniform(0.8, 1.2), 12.0, 100.0), 0.5);
                prim.h = quantize(std::clamp(span * rng.uniform(0.8, 1.2), 12.0, 100.0), 0.5);
            } else {
                prim.r = quantize(std::clamp(0.7 * span * rng.uniform(0.8, 1.2), 8.0, 100.0), 0.5);
            }
            step.sketch.push_back(prim);
            ast.steps.push_back(step);
        }
    }
    return ast;
}

}  // namespace

Ast random_program(uint64_t seed, int complexity) {
    if (complexity < 1 || complexity > 8)
        throw Error(ErrorCode::range_error,
                    "complexity must lie in [1,8], got " + std::to_string(complexity));
    for (uint64_t attempt = 0; attempt < 10; ++attempt) {
        Rng rng(derive_seed(seed, attempt));
        Ast ast = draw_program(rng, complexity);
        validate(ast);
        if (has_sign_change(ast, 64)) return ast;
    }
    throw Error(ErrorCode::generation_exhausted,
                "no renderable program after 10 attempts, seed " + std::to_string(seed));
}

Ast perturb_program(const Ast& ast, double magnitude, uint64_t seed) {
    Rng rng(seed);
    Ast out = ast;

    const auto jitter = [&](double v) { return v * (1.0 + rng.uniform(-1.0, 1.0) * magnitude); };
    const auto clamp_coord = [](double v) { return std::clamp(v, -kDomain, kDomain); };
    const auto clamp_dim = [](double v) { return std::clamp(v, 0.1, kDomain); };

    for (Step& step : out.steps) {
        step.offset = clamp_coord(jitter(step.offset));
        step.height = clamp_dim(jitter(step.height));
        for (Primitive& prim : step.sketch) {
            switch (prim.kind) {
                case PrimitiveKind::rect:
                    prim.cx = clamp_coord(jitter(prim.cx));
                    prim.cy = clamp_coord(jitter(prim.cy));
                    prim.w = clamp_dim(jitter(prim.w));
                    prim.h = clamp_dim(jitter(prim.h));
                    break;
                case PrimitiveKind::circle:
                    prim.cx = clamp_coord(jitter(prim.cx));
                    prim.cy = clamp_coord(jitter(prim.cy));
                    prim.r = clamp_dim(jitter(prim.r));
                    break;
                case PrimitiveKind::polygon:
                    for (auto& v : prim.vertices) {
                        v[0] = clamp_coord(jitter(v[0]));
                        v[1] = clamp_coord(jitter(v[1]));
                    }
                    break;
            }
        }
    }

    if (rng.coin(0.5 * magnitude)) {
        const bool prefer_drop = rng.coin(0.5);
        std::vector<size_t> droppable;
        for (size_t i = 0; i < out.steps.size(); ++i)
            if (out.steps[i].sketch.size() >= 2) droppable.push_back(i);
        const bool can_drop = !droppable.empty();
        const bool can_flip = out.steps.size() >= 2;

        if ((prefer_drop && can_drop) || (!can_flip && can_drop)) {
            Step& step = out.steps[droppable[rng.uniform_index(droppable.size())]];
            step.sketch.erase(step.sketch.begin() +
                              static_cast<long>(rng.uniform_index(step.sketch.size())));
        } else if (can_flip) {
            Step& step = out.steps[1 + rng.uniform_index(out.steps.size() - 1)];
            const Combine options[3] = {Combine::union_op, Combine::cut, Combine::intersect};
            std::vector<Combine> alternatives;
            for (Combine c : options)
                if (c != step.combine) alternatives.push_back(c);
            step.combine = alternatives[rng.uniform_index(alternatives.size())];
        }
    }
    return out;
}

ValidityReport classify_program(const std::string& text, int grid_resolution) {
    ValidityReport report;
    Ast ast;
    try {
        ast = parse(text);
        validate(ast);
    } catch (const Error& e) {
        report.valid = false;
        report.reason = e.code() == ErrorCode::range_error
                            ? ValidityReport::Reason::range_error
                            : ValidityReport::Reason::parse_error;
        report.detail = e.what();
        return report;
    }
    if (!has_sign_change(ast, grid_resolution)) {
        report.valid = false;
        report.reason = ValidityReport::Reason::degenerate_solid;
        report.detail = "no sign change on the render grid";
        return report;
    }
    report.valid = true;
    report.reason = ValidityReport::Reason::ok;
    return report;
}

}  // namespace cadloop::dsl
