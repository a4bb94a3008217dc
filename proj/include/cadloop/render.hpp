#pragma once

#include <string>

#include "cadloop/mesh.hpp"

namespace cadloop {

/// Program-to-mesh execution. Output meshes live in the modeling domain
/// [-100,100]^3. Invalid programs throw Error (parse_error, range_error,
/// degenerate_solid, ...); callers that need a validity verdict catch those.
class Renderer {
public:
    virtual ~Renderer() = default;
    virtual TriangleMesh render(const std::string& program) const = 0;
};

/// The in-process renderer: parse + SDF + marching cubes at a fixed grid.
class DslRenderer : public Renderer {
public:
    explicit DslRenderer(int grid_resolution = 128) : resolution_(grid_resolution) {}

    TriangleMesh render(const std::string& program) const override;

    int resolution() const { return resolution_; }

private:
    int resolution_;
};

}  // namespace cadloop
