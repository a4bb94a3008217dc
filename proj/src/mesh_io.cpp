#include "cadloop/mesh_io.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <fstream>
#include <sstream>

#include "cadloop/error.hpp"
#include "cadloop/util.hpp"

namespace cadloop {

namespace {

std::string lower_extension(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext;
}

double parse_coord(const std::string& token, const char* what) {
    try {
        size_t used = 0;
        const double v = std::stod(token, &used);
        if (used != token.size()) throw std::invalid_argument(token);
        return v;
    } catch (const std::exception&) {
        throw Error(ErrorCode::malformed_geometry, std::string("bad ") + what + ": '" + token + "'");
    }
}

TriangleMesh finish_mesh(TriangleMesh mesh) {
    if (mesh.triangles.empty())
        throw Error(ErrorCode::malformed_geometry, "file contains no triangles");
    for (const Vec3& v : mesh.vertices)
        if (!is_finite(v))
            throw Error(ErrorCode::malformed_geometry, "non-finite vertex coordinate");
    mesh.recompute_normals();
    mesh.validate();
    return mesh;
}

TriangleMesh load_obj(const std::string& text) {
    TriangleMesh mesh;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag)) continue;
        if (tag == "v") {
            std::string xs, ys, zs;
            if (!(ls >> xs >> ys >> zs))
                throw Error(ErrorCode::malformed_geometry, "OBJ vertex with fewer than 3 coordinates");
            mesh.vertices.push_back({parse_coord(xs, "OBJ coordinate"),
                                     parse_coord(ys, "OBJ coordinate"),
                                     parse_coord(zs, "OBJ coordinate")});
        } else if (tag == "f") {
            std::vector<uint32_t> face;
            std::string ref;
            while (ls >> ref) {
                // "idx", "idx/uv", "idx/uv/n", "idx//n"; negative = relative.
                const std::string first = ref.substr(0, ref.find('/'));
                long idx = 0;
                try {
                    idx = std::stol(first);
                } catch (const std::exception&) {
                    throw Error(ErrorCode::malformed_geometry, "bad OBJ face index: '" + ref + "'");
                }
                if (idx < 0) idx = static_cast<long>(mesh.vertices.size()) + idx + 1;
                if (idx < 1 || idx > static_cast<long>(mesh.vertices.size()))
                    throw Error(ErrorCode::malformed_geometry, "OBJ face index out of range");
                face.push_back(static_cast<uint32_t>(idx - 1));
            }
            if (face.size() < 3)
                throw Error(ErrorCode::malformed_geometry, "OBJ face with fewer than 3 vertices");
            for (size_t i = 1; i + 1 < face.size(); ++i)
                mesh.triangles.push_back({face[0], face[i], face[i + 1]});
        }
    }
    return finish_mesh(std::move(mesh));
}

TriangleMesh load_stl(const std::vector<uint8_t>& bytes) {
    // Binary STL: 80-byte header, uint32 count, 50 bytes per facet. Files that
    // start with "solid" can still be binary, so verify the size equation.
    bool binary = false;
    if (bytes.size() >= 84) {
        uint32_t count = 0;
        std::memcpy(&count, bytes.data() + 80, 4);
        if (bytes.size() == 84 + static_cast<size_t>(count) * 50 && count > 0) binary = true;
    }

    TriangleMesh mesh;
    if (binary) {
        uint32_t count = 0;
        std::memcpy(&count, bytes.data() + 80, 4);
        mesh.vertices.reserve(static_cast<size_t>(count) * 3);
        mesh.triangles.reserve(count);
        size_t off = 84;
        for (uint32_t t = 0; t < count; ++t) {
            off += 12;  // stored facet normal is ignored; winding is authoritative
            for (int c = 0; c < 3; ++c) {
                float xyz[3];
                std::memcpy(xyz, bytes.data() + off, 12);
                off += 12;
                mesh.vertices.push_back({xyz[0], xyz[1], xyz[2]});
            }
            off += 2;  // attribute byte count
            const uint32_t base = static_cast<uint32_t>(mesh.vertices.size()) - 3;
            mesh.triangles.push_back({base, base + 1, base + 2});
        }
    } else {
        const std::string text(bytes.begin(), bytes.end());
        std::istringstream in(text);
        std::string tok;
        std::vector<Vec3> tri;
        bool saw_solid = false;
        while (in >> tok) {
            if (tok == "solid") saw_solid = true;
            if (tok == "vertex") {
                std::string xs, ys, zs;
                if (!(in >> xs >> ys >> zs))
                    throw Error(ErrorCode::malformed_geometry, "ASCII STL truncated vertex");
                tri.push_back({parse_coord(xs, "STL coordinate"), parse_coord(ys, "STL coordinate"),
                               parse_coord(zs, "STL coordinate")});
                if (tri.size() == 3) {
                    const uint32_t base = static_cast<uint32_t>(mesh.vertices.size());
                    mesh.vertices.insert(mesh.vertices.end(), tri.begin(), tri.end());
                    mesh.triangles.push_back({base, base + 1, base + 2});
                    tri.clear();
                }
            }
        }
        if (!saw_solid && mesh.triangles.empty())
            throw Error(ErrorCode::malformed_geometry, "not a recognizable STL file");
    }
    return finish_mesh(std::move(mesh));
}

TriangleMesh load_ply(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("ply", 0) != 0)
        throw Error(ErrorCode::malformed_geometry, "missing 'ply' magic");

    size_t vertex_count = 0, face_count = 0;
    int coord_props = 0;        // properties before/including x y z on vertices
    int vertex_props = 0;       // total scalar properties per vertex line
    int prop_x = -1;
    std::string element;
    bool ascii = false;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "format") {
            std::string fmt;
            ls >> fmt;
            ascii = (fmt == "ascii");
        } else if (tag == "element") {
            std::string name;
            size_t n = 0;
            ls >> name >> n;
            element = name;
            if (name == "vertex") vertex_count = n;
            if (name == "face") face_count = n;
        } else if (tag == "property" && element == "vertex") {
            std::string type, name;
            ls >> type >> name;
            if (name == "x") prop_x = vertex_props;
            ++vertex_props;
            (void)coord_props;
        } else if (tag == "end_header") {
            break;
        }
    }
    if (!ascii) throw Error(ErrorCode::unsupported_format, "only ASCII PLY is supported");
    if (vertex_count == 0 || prop_x < 0)
        throw Error(ErrorCode::malformed_geometry, "PLY without vertex x/y/z properties");

    TriangleMesh mesh;
    mesh.vertices.reserve(vertex_count);
    for (size_t i = 0; i < vertex_count; ++i) {
        if (!std::getline(in, line))
            throw Error(ErrorCode::malformed_geometry, "PLY truncated vertex list");
        std::istringstream ls(line);
        std::vector<double> vals;
        double v;
        while (ls >> v) vals.push_back(v);
        if (static_cast<int>(vals.size()) < prop_x + 3)
            throw Error(ErrorCode::malformed_geometry, "PLY vertex line too short");
        mesh.vertices.push_back({vals[prop_x], vals[prop_x + 1], vals[prop_x + 2]});
    }
    for (size_t i = 0; i < face_count; ++i) {
        if (!std::getline(in, line))
            throw Error(ErrorCode::malformed_geometry, "PLY truncated face list");
        std::istringstream ls(line);
        size_t n = 0;
        if (!(ls >> n) || n < 3)
            throw Error(ErrorCode::malformed_geometry, "PLY face with fewer than 3 vertices");
        std::vector<uint32_t> face(n);
        for (size_t k = 0; k < n; ++k) {
            long idx;
            if (!(ls >> idx) || idx < 0 || idx >= static_cast<long>(mesh.vertices.size()))
                throw Error(ErrorCode::malformed_geometry, "PLY face index out of range");
            face[k] = static_cast<uint32_t>(idx);
        }
        for (size_t k = 1; k + 1 < n; ++k)
            mesh.triangles.push_back({face[0], face[k], face[k + 1]});
    }
    return finish_mesh(std::move(mesh));
}

}  // namespace

TriangleMesh load_mesh(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path))
        throw Error(ErrorCode::file_not_found, path.string());
    const std::string ext = lower_extension(path);
    if (ext != ".obj" && ext != ".stl" && ext != ".ply")
        throw Error(ErrorCode::unsupported_format, "unsupported mesh format: " + ext);
    const std::vector<uint8_t> bytes = read_binary_file(path);
    if (bytes.empty())
        throw Error(ErrorCode::malformed_geometry, "empty file: " + path.string());
    if (ext == ".obj") return load_obj(std::string(bytes.begin(), bytes.end()));
    if (ext == ".stl") return load_stl(bytes);
    return load_ply(std::string(bytes.begin(), bytes.end()));
}

void save_mesh(const TriangleMesh& mesh, const std::filesystem::path& path) {
    const std::string ext = lower_extension(path);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    if (ext == ".obj") {
        std::ostringstream out;
        out.precision(17);
        for (const Vec3& v : mesh.vertices) out << "v " << v.x << ' ' << v.y << ' ' << v.z << '\n';
        for (const auto& t : mesh.triangles)
            out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
        write_text_file(path, out.str());
    } else if (ext == ".stl") {
        std::vector<uint8_t> bytes(84, 0);
        const char header[] = "cadloop binary stl";
        std::memcpy(bytes.data(), header, sizeof(header) - 1);
        const uint32_t count = static_cast<uint32_t>(mesh.triangle_count());
        std::memcpy(bytes.data() + 80, &count, 4);
        bytes.reserve(84 + static_cast<size_t>(count) * 50);
        for (size_t t = 0; t < mesh.triangle_count(); ++t) {
            float record[12];
            const Vec3 n = t < mesh.face_normals.size() ? mesh.face_normals[t] : Vec3{};
            record[0] = static_cast<float>(n.x);
            record[1] = static_cast<float>(n.y);
            record[2] = static_cast<float>(n.z);
            for (int c = 0; c < 3; ++c) {
                const Vec3 v = mesh.triangle_vertex(t, c);
                record[3 + c * 3 + 0] = static_cast<float>(v.x);
                record[3 + c * 3 + 1] = static_cast<float>(v.y);
                record[3 + c * 3 + 2] = static_cast<float>(v.z);
            }
            const size_t off = bytes.size();
            bytes.resize(off + 50, 0);
            std::memcpy(bytes.data() + off, record, 48);
        }
        write_binary_file(path, bytes);
    } else if (ext == ".ply") {
        std::ostringstream out;
        out.precision(17);
        out << "ply\nformat ascii 1.0\nelement vertex " << mesh.vertices.size()
            << "\nproperty double x\nproperty double y\nproperty double z\nelement face "
            << mesh.triangle_count() << "\nproperty list uchar int vertex_indices\nend_header\n";
        for (const Vec3& v : mesh.vertices) out << v.x << ' ' << v.y << ' ' << v.z << '\n';
        for (const auto& t : mesh.triangles)
            out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
        write_text_file(path, out.str());
    } else {
        throw Error(ErrorCode::unsupported_format, "unsupported mesh format: " + ext);
    }
}

void save_point_cloud_ply(const std::vector<PointSample>& points,
                          const std::filesystem::path& path) {
    std::ostringstream out;
    out.precision(17);
    out << "ply\nformat ascii 1.0\nelement vertex " << points.size()
        << "\nproperty double x\nproperty double y\nproperty double z\n"
           "property double nx\nproperty double ny\nproperty double nz\nend_header\n";
    for (const PointSample& p : points)
        out << p.position.x << ' ' << p.position.y << ' ' << p.position.z << ' '
            << p.normal.x << ' ' << p.normal.y << ' ' << p.normal.z << '\n';
    write_text_file(path, out.str());
}

}  // namespace cadloop
