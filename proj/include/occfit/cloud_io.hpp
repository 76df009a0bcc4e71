#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "occfit/point_cloud.hpp"
#include "occfit/types.hpp"

namespace occfit {

enum class CloudFormat { xyz, ply };

inline CloudFormat cloud_format_from_path(const std::string& path) {
    const auto ext = std::filesystem::path(path).extension().string();
    if (ext == ".ply") return CloudFormat::ply;
    return CloudFormat::xyz;
}

namespace detail {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline bool parse_double(const std::string& tok, double& out) {
    const char* s = tok.c_str();
    char* end = nullptr;
    out = std::strtod(s, &end);
    return end != s && *end == '\0';
}

struct PlyProperty {
    std::string type;
    std::string name;
};

inline std::size_t ply_scalar_size(const std::string& type) {
    if (type == "char" || type == "uchar" || type == "int8" || type == "uint8") return 1;
    if (type == "short" || type == "ushort" || type == "int16" || type == "uint16") return 2;
    if (type == "int" || type == "uint" || type == "int32" || type == "uint32" || type == "float" ||
        type == "float32")
        return 4;
    if (type == "double" || type == "float64") return 8;
    return 0;
}

inline double ply_read_scalar(const unsigned char* p, const std::string& type) {
    if (type == "float" || type == "float32") {
        float f;
        std::memcpy(&f, p, 4);
        return static_cast<double>(f);
    }
    if (type == "double" || type == "float64") {
        double d;
        std::memcpy(&d, p, 8);
        return d;
    }
    if (type == "int" || type == "int32") {
        std::int32_t v;
        std::memcpy(&v, p, 4);
        return v;
    }
    if (type == "uint" || type == "uint32") {
        std::uint32_t v;
        std::memcpy(&v, p, 4);
        return v;
    }
    if (type == "short" || type == "int16") {
        std::int16_t v;
        std::memcpy(&v, p, 2);
        return v;
    }
    if (type == "ushort" || type == "uint16") {
        std::uint16_t v;
        std::memcpy(&v, p, 2);
        return v;
    }
    if (type == "char" || type == "int8") return *reinterpret_cast<const signed char*>(p);
    return *p; // uchar / uint8
}

inline PointCloud load_xyz(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Error::Code::file_not_found, "cannot open " + path);
    PointCloud cloud;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::string tx, ty, tz;
        if (!(ls >> tx)) continue; // blank line
        if (!(ls >> ty >> tz))
            throw Error(Error::Code::parse, path + ": line " + std::to_string(line_no) + ": expected 3 coordinates",
                        line_no);
        Vec3 p;
        if (!parse_double(tx, p.x()) || !parse_double(ty, p.y()) || !parse_double(tz, p.z()))
            throw Error(Error::Code::parse, path + ": line " + std::to_string(line_no) + ": non-numeric coordinate",
                        line_no);
        cloud.points.push_back(p); // extra columns ignored
    }
    return cloud;
}

inline PointCloud load_ply(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Error::Code::file_not_found, "cannot open " + path);

    std::string line;
    long line_no = 0;
    auto next_line = [&]() {
        if (!std::getline(in, line))
            throw Error(Error::Code::parse, path + ": unexpected end of header", line_no);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        ++line_no;
    };

    next_line();
    if (line != "ply") throw Error(Error::Code::parse, path + ": not a ply file", line_no);

    bool binary = false;
    bool in_vertex_element = false;
    bool seen_vertex = false;
    std::size_t vertex_count = 0;
    std::vector<PlyProperty> vertex_props;
    for (;;) {
        next_line();
        std::istringstream ls(line);
        std::string kw;
        ls >> kw;
        if (kw == "comment" || kw == "obj_info" || kw.empty()) continue;
        if (kw == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt == "binary_little_endian")
                binary = true;
            else if (fmt != "ascii")
                throw Error(Error::Code::parse, path + ": unsupported ply format " + fmt, line_no);
            continue;
        }
        if (kw == "element") {
            std::string name;
            std::size_t count = 0;
            ls >> name >> count;
            in_vertex_element = (name == "vertex");
            if (in_vertex_element) {
                seen_vertex = true;
                vertex_count = count;
            }
            continue;
        }
        if (kw == "property") {
            if (!in_vertex_element) continue;
            PlyProperty prop;
            ls >> prop.type;
            if (prop.type == "list")
                throw Error(Error::Code::parse, path + ": list property in vertex element", line_no);
            ls >> prop.name;
            vertex_props.push_back(prop);
            continue;
        }
        if (kw == "end_header") break;
        throw Error(Error::Code::parse, path + ": unknown header keyword " + kw, line_no);
    }

    if (!seen_vertex) throw Error(Error::Code::parse, path + ": no vertex element", line_no);
    int ix = -1, iy = -1, iz = -1;
    std::size_t stride = 0;
    std::vector<std::size_t> offsets(vertex_props.size());
    for (std::size_t i = 0; i < vertex_props.size(); ++i) {
        offsets[i] = stride;
        const std::size_t sz = ply_scalar_size(vertex_props[i].type);
        if (sz == 0)
            throw Error(Error::Code::parse, path + ": unsupported property type " + vertex_props[i].type, line_no);
        stride += sz;
        if (vertex_props[i].name == "x") ix = static_cast<int>(i);
        if (vertex_props[i].name == "y") iy = static_cast<int>(i);
        if (vertex_props[i].name == "z") iz = static_cast<int>(i);
    }
    if (ix < 0 || iy < 0 || iz < 0)
        throw Error(Error::Code::parse, path + ": vertex element lacks x/y/z properties", line_no);

    PointCloud cloud;
    cloud.points.resize(vertex_count);
    if (binary) {
        std::vector<unsigned char> rec(stride);
        for (std::size_t v = 0; v < vertex_count; ++v) {
            in.read(reinterpret_cast<char*>(rec.data()), static_cast<std::streamsize>(stride));
            if (!in)
                throw Error(Error::Code::parse, path + ": truncated vertex data at vertex " + std::to_string(v),
                            -1);
            cloud.points[v] = {ply_read_scalar(rec.data() + offsets[ix], vertex_props[ix].type),
                               ply_read_scalar(rec.data() + offsets[iy], vertex_props[iy].type),
                               ply_read_scalar(rec.data() + offsets[iz], vertex_props[iz].type)};
        }
    } else {
        for (std::size_t v = 0; v < vertex_count; ++v) {
            next_line();
            std::istringstream ls(line);
            std::vector<std::string> toks(vertex_props.size());
            for (auto& t : toks)
                if (!(ls >> t))
                    throw Error(Error::Code::parse, path + ": line " + std::to_string(line_no) + ": short vertex record",
                                line_no);
            Vec3 p;
            if (!parse_double(toks[ix], p.x()) || !parse_double(toks[iy], p.y()) || !parse_double(toks[iz], p.z()))
                throw Error(Error::Code::parse, path + ": line " + std::to_string(line_no) + ": non-numeric coordinate",
                            line_no);
            cloud.points[v] = p;
        }
    }
    return cloud;
}

} // namespace detail

inline PointCloud load_point_cloud(const std::string& path, CloudFormat format) {
    if (!std::filesystem::exists(path)) throw Error(Error::Code::file_not_found, "no such file: " + path);
    PointCloud cloud = format == CloudFormat::xyz ? detail::load_xyz(path) : detail::load_ply(path);
    if (cloud.empty()) throw Error(Error::Code::empty_cloud, path + ": no points");
    if (!cloud.all_finite()) throw Error(Error::Code::parse, path + ": non-finite coordinate");
    cloud.source_bytes = std::filesystem::file_size(path);
    return cloud;
}

inline PointCloud load_point_cloud(const std::string& path) {
    return load_point_cloud(path, cloud_format_from_path(path));
}

inline void write_xyz(const PointCloud& cloud, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error(Error::Code::io, "cannot write " + path);
    for (const Vec3& p : cloud.points)
        out << detail::format_double(p.x()) << ' ' << detail::format_double(p.y()) << ' '
            << detail::format_double(p.z()) << '\n';
    if (!out) throw Error(Error::Code::io, "write failed: " + path);
}

struct PlyWriteOptions {
    bool binary = true;
    bool double_precision = true; // float64 properties keep round-trips bit-exact
};

inline void write_ply(const PointCloud& cloud, const std::string& path, PlyWriteOptions opt = {}) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Error::Code::io, "cannot write " + path);
    const char* type = opt.double_precision ? "double" : "float";
    out << "ply\n"
        << "format " << (opt.binary ? "binary_little_endian" : "ascii") << " 1.0\n"
        << "element vertex " << cloud.size() << "\n"
        << "property " << type << " x\n"
        << "property " << type << " y\n"
        << "property " << type << " z\n"
        << "end_header\n";
    if (opt.binary) {
        for (const Vec3& p : cloud.points) {
            if (opt.double_precision) {
                double v[3] = {p.x(), p.y(), p.z()};
                out.write(reinterpret_cast<const char*>(v), sizeof(v));
            } else {
                float v[3] = {static_cast<float>(p.x()), static_cast<float>(p.y()),
                              static_cast<float>(p.z())};
                out.write(reinterpret_cast<const char*>(v), sizeof(v));
            }
        }
    } else {
        for (const Vec3& p : cloud.points) {
            if (opt.double_precision) {
                out << detail::format_double(p.x()) << ' ' << detail::format_double(p.y()) << ' '
                    << detail::format_double(p.z()) << '\n';
            } else {
                char buf[64];
                std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g\n", static_cast<float>(p.x()),
                              static_cast<float>(p.y()), static_cast<float>(p.z()));
                out << buf;
            }
        }
    }
    if (!out) throw Error(Error::Code::io, "write failed: " + path);
}

inline void write_point_cloud(const PointCloud& cloud, const std::string& path) {
    if (cloud_format_from_path(path) == CloudFormat::ply)
        write_ply(cloud, path);
    else
        write_xyz(cloud, path);
}

} // namespace occfit
