#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "occkit/core.hpp"
#include "occkit/edge_prior.hpp"
#include "occkit/errors.hpp"
#include "occkit/ray_metrics.hpp"

namespace occkit {

// Shortest decimal form that round-trips a double exactly.
inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace detail {

inline void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

struct ByteReader {
  const std::string& bytes;
  std::size_t pos = 0;

  void need(std::size_t n, const char* what) const {
    if (pos + n > bytes.size()) {
      throw format_error(std::string("OCCG file truncated in ") + what, pos);
    }
  }

  std::uint8_t u8(const char* what) {
    need(1, what);
    return static_cast<std::uint8_t>(bytes[pos++]);
  }

  std::uint16_t u16(const char* what) {
    need(2, what);
    const std::uint16_t v = static_cast<std::uint16_t>(
        static_cast<std::uint8_t>(bytes[pos]) |
        (static_cast<std::uint16_t>(static_cast<std::uint8_t>(bytes[pos + 1])) << 8));
    pos += 2;
    return v;
  }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes[pos + i])) << (8 * i);
    }
    pos += 4;
    return v;
  }

  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
};

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw format_error("cannot open file: " + path, 0);
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

inline void write_file_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw format_error("cannot open file for writing: " + path, 0);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw format_error("short write: " + path, 0);
}

}  // namespace detail

// OCCG v1: "OCCG", version u32, dims 3xu32, voxel_size 3xf32, origin 3xf32,
// class_count u32, free_class u32, semantics u8[n], instances u16[n].
// Little-endian, x-major voxel order.
inline void write_occg(const VoxelGrid& grid, const std::string& path) {
  grid.validate();
  std::string out;
  out.reserve(52 + grid.semantics.size() * 3);
  out += "OCCG";
  detail::put_u32(out, 1);
  for (int a = 0; a < 3; ++a) detail::put_u32(out, static_cast<std::uint32_t>(grid.geometry.dims[a]));
  for (int a = 0; a < 3; ++a) {
    detail::put_f32(out, static_cast<float>(grid.geometry.voxel_size[a]));
  }
  detail::put_f32(out, static_cast<float>(grid.geometry.x_range[0]));
  detail::put_f32(out, static_cast<float>(grid.geometry.y_range[0]));
  detail::put_f32(out, static_cast<float>(grid.geometry.z_range[0]));
  detail::put_u32(out, static_cast<std::uint32_t>(grid.class_count));
  detail::put_u32(out, static_cast<std::uint32_t>(grid.free_class));
  for (std::uint8_t s : grid.semantics) out.push_back(static_cast<char>(s));
  for (std::uint16_t i : grid.instances) detail::put_u16(out, i);
  detail::write_file_bytes(path, out);
}

inline VoxelGrid read_occg(const std::string& path) {
  const std::string bytes = detail::read_file_bytes(path);
  detail::ByteReader r{bytes};

  r.need(4, "magic");
  if (bytes.compare(0, 4, "OCCG") != 0) throw format_error("bad OCCG magic", 0);
  r.pos = 4;
  const std::uint32_t version = r.u32("version");
  if (version != 1) throw format_error("unsupported OCCG version", 4);

  const std::size_t dims_offset = r.pos;
  std::array<int, 3> dims{};
  for (int a = 0; a < 3; ++a) {
    const std::uint32_t d = r.u32("dims");
    if (d == 0 || d > (1u << 24)) throw format_error("OCCG dims out of range", dims_offset);
    dims[static_cast<std::size_t>(a)] = static_cast<int>(d);
  }
  const std::size_t cells = static_cast<std::size_t>(dims[0]) *
                            static_cast<std::size_t>(dims[1]) *
                            static_cast<std::size_t>(dims[2]);
  if (cells > (std::size_t{1} << 31)) throw format_error("OCCG dims product too large", dims_offset);

  const std::size_t voxel_offset = r.pos;
  Vec3 voxel{r.f32("voxel_size"), r.f32("voxel_size"), r.f32("voxel_size")};
  if (!(voxel.x > 0.0f) || !(voxel.y > 0.0f) || !(voxel.z > 0.0f) || !all_finite(voxel)) {
    throw format_error("OCCG voxel_size must be positive and finite", voxel_offset);
  }
  const std::size_t origin_offset = r.pos;
  Vec3 origin{r.f32("origin"), r.f32("origin"), r.f32("origin")};
  if (!all_finite(origin)) throw format_error("OCCG origin must be finite", origin_offset);

  const std::size_t class_offset = r.pos;
  const std::uint32_t class_count = r.u32("class_count");
  if (class_count == 0 || class_count > 256) {
    throw format_error("OCCG class_count out of range", class_offset);
  }
  const std::size_t free_offset = r.pos;
  const std::uint32_t free_class = r.u32("free_class");
  if (free_class >= class_count) throw format_error("OCCG free_class out of range", free_offset);

  // Ranges derive from origin + dims * voxel_size, which reconstructs the
  // span to a few ulps, well inside the geometry tolerance.
  const GridGeometry g = GridGeometry::create(
      {origin.x, origin.x + dims[0] * voxel.x}, {origin.y, origin.y + dims[1] * voxel.y},
      {origin.z, origin.z + dims[2] * voxel.z}, voxel);

  VoxelGrid grid = VoxelGrid::filled_free(g, static_cast<int>(class_count),
                                          static_cast<int>(free_class));
  for (std::size_t i = 0; i < cells; ++i) {
    const std::size_t at = r.pos;
    const std::uint8_t s = r.u8("semantics");
    if (s >= class_count) throw format_error("OCCG semantic id exceeds class_count", at);
    grid.semantics[i] = s;
  }
  for (std::size_t i = 0; i < cells; ++i) grid.instances[i] = r.u16("instances");
  if (r.pos != bytes.size()) {
    throw format_error("OCCG trailing bytes after payload", r.pos);
  }
  return grid;
}

// Plain-text camera rig: one block per camera with name, image size,
// row-major intrinsics (9 values) and camera-to-ego extrinsic (16 values).
inline void write_rig(const std::vector<CameraModel>& rig, const std::string& path) {
  std::string out = "# occkit camera rig v1\n";
  for (std::size_t i = 0; i < rig.size(); ++i) {
    rig[i].validate();
    out += "camera cam" + std::to_string(i) + "\n";
    out += "size " + std::to_string(rig[i].width) + " " + std::to_string(rig[i].height) + "\n";
    out += "K";
    for (double v : rig[i].intrinsics.m) out += " " + format_double(v);
    out += "\nT";
    for (double v : rig[i].extrinsic.m) out += " " + format_double(v);
    out += "\n";
  }
  detail::write_file_bytes(path, out);
}

inline std::vector<CameraModel> read_rig(const std::string& path) {
  const std::string text = detail::read_file_bytes(path);
  std::vector<CameraModel> rig;
  CameraModel current;
  bool open = false;
  bool have_size = false, have_k = false, have_t = false;

  std::size_t line_start = 0;
  std::istringstream stream(text);
  std::string line;
  const auto finish = [&](std::size_t at) {
    if (!open) return;
    if (!have_size || !have_k || !have_t) {
      throw format_error("rig camera block missing size, K, or T", at);
    }
    try {
      current.validate();
    } catch (const std::exception& e) {
      throw format_error(std::string("rig camera invalid: ") + e.what(), at);
    }
    rig.push_back(current);
  };

  while (std::getline(stream, line)) {
    const std::size_t at = line_start;
    line_start += line.size() + 1;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "camera") {
      finish(at);
      current = CameraModel{};
      open = true;
      have_size = have_k = have_t = false;
      std::string name;
      if (!(ls >> name)) throw format_error("rig camera line missing name", at);
    } else if (key == "size") {
      if (!open) throw format_error("rig size line outside camera block", at);
      if (!(ls >> current.width >> current.height)) {
        throw format_error("rig size line malformed", at);
      }
      have_size = true;
    } else if (key == "K") {
      if (!open) throw format_error("rig K line outside camera block", at);
      for (double& v : current.intrinsics.m) {
        if (!(ls >> v)) throw format_error("rig K line needs 9 values", at);
      }
      have_k = true;
    } else if (key == "T") {
      if (!open) throw format_error("rig T line outside camera block", at);
      for (double& v : current.extrinsic.m) {
        if (!(ls >> v)) throw format_error("rig T line needs 16 values", at);
      }
      have_t = true;
    } else {
      throw format_error("rig line with unknown key: " + key, at);
    }
  }
  finish(text.size());
  if (rig.empty()) throw format_error("rig file defines no cameras", 0);
  return rig;
}

// BEV grid as CSV rows (x, y, channel, value), all cells, fixed order.
inline void write_bev_csv(const BEVGrid& grid, const std::string& path) {
  std::string out = "x,y,channel,value\n";
  for (int ix = 0; ix < grid.geometry.dims[0]; ++ix) {
    for (int iy = 0; iy < grid.geometry.dims[1]; ++iy) {
      for (int c = 0; c < grid.channels; ++c) {
        out += std::to_string(ix);
        out += ',';
        out += std::to_string(iy);
        out += ',';
        out += std::to_string(c);
        out += ',';
        out += format_double(grid.at(ix, iy, c));
        out += '\n';
      }
    }
  }
  detail::write_file_bytes(path, out);
}

// 8-bit binary PGM; edge value 1 maps to 255.
inline void write_edge_pgm(const EdgeMap& edges, const std::string& path) {
  edges.validate();
  std::string out = "P5\n" + std::to_string(edges.width) + " " + std::to_string(edges.height) +
                    "\n255\n";
  for (double v : edges.values) {
    out.push_back(static_cast<char>(v > 0.5 ? 255 : static_cast<int>(v * 255.0 + 0.5)));
  }
  detail::write_file_bytes(path, out);
}

inline void write_edge_csv(const EdgeMap& edges, const std::string& path) {
  edges.validate();
  std::string out = "row,col,value\n";
  for (int r = 0; r < edges.height; ++r) {
    for (int c = 0; c < edges.width; ++c) {
      out += std::to_string(r);
      out += ',';
      out += std::to_string(c);
      out += ',';
      out += format_double(edges.at(r, c));
      out += '\n';
    }
  }
  detail::write_file_bytes(path, out);
}

// MetricReport as CSV rows (metric, class, threshold, value) in a fixed
// order: per-class IoU for the classes included in the mean, then miou, then
// rayiou per threshold plus mean, then raypq blocks per threshold plus mean.
inline void write_report_csv(const MetricReport& report, const std::string& path,
                             bool with_miou = true, bool with_rayiou = true,
                             bool with_raypq = true) {
  std::string out = "metric,class,threshold,value\n";
  const auto row = [&](const std::string& metric, const std::string& cls,
                       const std::string& threshold, double value) {
    out += metric + "," + cls + "," + threshold + "," + format_double(value) + "\n";
  };
  if (with_miou) {
    for (std::size_t c = 0; c < report.iou.per_class.size(); ++c) {
      if (!report.iou.included[c]) continue;
      row("iou", std::to_string(c), "", report.iou.per_class[c]);
    }
    row("miou", "", "", report.iou.miou);
  }
  if (with_rayiou) {
    for (const auto& [threshold, value] : report.ray_iou.at) {
      row("rayiou", "", format_double(threshold), value);
    }
    row("rayiou", "", "mean", report.ray_iou.mean);
  }
  if (with_raypq) {
    for (const auto& [threshold, pc] : report.ray_pq.at) {
      const std::string t = format_double(threshold);
      row("raypq_sq", "", t, pc.sq);
      row("raypq_rq", "", t, pc.rq);
      row("raypq_pq", "", t, pc.pq);
    }
    row("raypq", "", "mean", report.ray_pq.mean);
  }
  detail::write_file_bytes(path, out);
}

}  // namespace occkit
