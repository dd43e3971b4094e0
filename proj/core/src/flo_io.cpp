#include "ofsr/flo_io.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

#include "ofsr/errors.hpp"

namespace ofsr {

namespace {
constexpr float kFloMagic = 202021.25f;
}

FlowField read_flo(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw data_error("read_flo: cannot open " + path);
  }
  float magic = 0.0f;
  std::int32_t w = 0, h = 0;
  in.read(reinterpret_cast<char*>(&magic), 4);
  if (!in) throw data_error("read_flo: " + path + ": truncated before magic");
  if (magic != kFloMagic) {
    throw data_error("read_flo: " + path + ": bad magic, expected " +
                     std::to_string(kFloMagic) + " found " + std::to_string(magic));
  }
  in.read(reinterpret_cast<char*>(&w), 4);
  in.read(reinterpret_cast<char*>(&h), 4);
  if (!in) throw data_error("read_flo: " + path + ": truncated in header");
  if (w <= 0 || h <= 0) {
    throw data_error("read_flo: " + path + ": nonpositive dimensions " +
                     std::to_string(w) + "x" + std::to_string(h));
  }
  FlowField f(w, h);
  std::vector<float> row(static_cast<std::size_t>(w) * 2);
  for (int y = 0; y < h; ++y) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size() * 4));
    if (!in) {
      throw data_error("read_flo: " + path + ": truncated at row " + std::to_string(y));
    }
    for (int x = 0; x < w; ++x) {
      f.u_at(x, y) = row[2 * x];
      f.v_at(x, y) = row[2 * x + 1];
    }
  }
  return f;
}

void write_flo(const FlowField& flow, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw data_error("write_flo: cannot open " + path + " for writing");
  }
  const std::int32_t w = flow.width, h = flow.height;
  out.write(reinterpret_cast<const char*>(&kFloMagic), 4);
  out.write(reinterpret_cast<const char*>(&w), 4);
  out.write(reinterpret_cast<const char*>(&h), 4);
  std::vector<float> row(static_cast<std::size_t>(w) * 2);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      row[2 * x] = flow.u_at(x, y);
      row[2 * x + 1] = flow.v_at(x, y);
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * 4));
  }
  if (!out) {
    throw data_error("write_flo: short write to " + path);
  }
}

}  // namespace ofsr
