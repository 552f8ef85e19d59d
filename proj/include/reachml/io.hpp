#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "reachml/common.hpp"
#include "reachml/forward_model.hpp"
#include "reachml/task.hpp"

namespace reachml {

static_assert(std::endian::native == std::endian::little,
              "binary formats are little-endian; big-endian hosts are unsupported");

namespace detail {

class BinWriter {
 public:
  explicit BinWriter(std::ostream& os) : os_(os) {}
  void u8(std::uint8_t v) { raw(&v, 1); }
  void u32(std::uint32_t v) { raw(&v, 4); }
  void u64(std::uint64_t v) { raw(&v, 8); }
  void f64(double v) { raw(&v, 8); }
  void bytes(const void* p, std::size_t n) { raw(p, n); }
  void str(const std::string& s) {
    u8(static_cast<std::uint8_t>(s.size()));
    raw(s.data(), s.size());
  }

 private:
  void raw(const void* p, std::size_t n) {
    os_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  }
  std::ostream& os_;
};

class BinReader {
 public:
  explicit BinReader(std::istream& is, std::string name) : is_(is), name_(std::move(name)) {}
  std::uint8_t u8() { std::uint8_t v; raw(&v, 1); return v; }
  std::uint32_t u32() { std::uint32_t v; raw(&v, 4); return v; }
  std::uint64_t u64() { std::uint64_t v; raw(&v, 8); return v; }
  double f64() { double v; raw(&v, 8); return v; }
  void bytes(void* p, std::size_t n) { raw(p, n); }
  std::string str() {
    std::string s(u8(), '\0');
    raw(s.data(), s.size());
    return s;
  }
  void expect_magic(const char (&magic)[9]) {
    char buf[8];
    raw(buf, 8);
    if (std::memcmp(buf, magic, 8) != 0) {
      throw std::runtime_error(name_ + ": bad magic (wrong file type?)");
    }
  }

 private:
  void raw(void* p, std::size_t n) {
    is_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!is_) throw std::runtime_error(name_ + ": truncated or unreadable");
  }
  std::istream& is_;
  std::string name_;
};

}  // namespace detail

// Write-then-rename so partially written artifacts never appear under the
// final name.
inline void atomic_write(const std::filesystem::path& path,
                         const std::function<void(std::ostream&)>& fill) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open for writing: " + tmp.string());
    fill(os);
    os.flush();
    if (!os) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

// ---- corpus files ----

inline constexpr char kCorpusMagic[9] = "RMLCORP1";
inline constexpr std::uint32_t kCorpusVersion = 1;

struct CorpusFile {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  Condition condition = Condition::Rot;
  std::uint32_t steps = 42;
  ArmGeometry geom;
  double goal_radius = 1.6;
  double goal_dist = 8.0;
  std::vector<Trajectory> trajectories;
};

inline void save_corpus(const CorpusFile& c, const std::filesystem::path& path) {
  atomic_write(path, [&c](std::ostream& os) {
    detail::BinWriter w(os);
    w.bytes(kCorpusMagic, 8);
    w.u32(kCorpusVersion);
    w.u64(c.config_hash);
    w.u64(c.seed);
    w.u8(c.condition == Condition::Rot ? 0 : 1);
    w.u32(static_cast<std::uint32_t>(c.trajectories.size()));
    w.u32(c.steps);
    w.f64(c.geom.dt());
    w.f64(c.geom.upper_len);
    w.f64(c.geom.fore_len);
    w.f64(c.geom.vel_limit);
    w.f64(c.geom.acc_limit);
    w.u32(static_cast<std::uint32_t>(c.geom.steps_per_second));
    w.f64(c.geom.initial_shoulder);
    w.f64(c.geom.initial_elbow);
    w.f64(c.goal_radius);
    w.f64(c.goal_dist);
    for (const auto& tr : c.trajectories) {
      w.f64(tr.transform.rotation_deg);
      w.f64(tr.transform.shear);
      w.f64(tr.transform.scale_x);
      w.f64(tr.transform.scale_y);
      w.f64(tr.goal.x());
      w.f64(tr.goal.y());
      for (const auto& a : tr.actions) {
        w.f64(a.shoulder_acc);
        w.f64(a.elbow_acc);
      }
      for (const auto& p : tr.cursors) {
        w.f64(p.x());
        w.f64(p.y());
      }
    }
  });
}

inline CorpusFile load_corpus(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingInputError("cannot open corpus file: " + path.string());
  detail::BinReader r(is, path.string());
  r.expect_magic(kCorpusMagic);
  const std::uint32_t version = r.u32();
  if (version != kCorpusVersion) {
    throw std::runtime_error(path.string() + ": unsupported corpus version " +
                             std::to_string(version));
  }
  CorpusFile c;
  c.config_hash = r.u64();
  c.seed = r.u64();
  c.condition = r.u8() == 0 ? Condition::Rot : Condition::RotPlus;
  const std::uint32_t count = r.u32();
  c.steps = r.u32();
  (void)r.f64();  // dt, redundant with steps_per_second
  c.geom.upper_len = r.f64();
  c.geom.fore_len = r.f64();
  c.geom.vel_limit = r.f64();
  c.geom.acc_limit = r.f64();
  c.geom.steps_per_second = static_cast<int>(r.u32());
  c.geom.initial_shoulder = r.f64();
  c.geom.initial_elbow = r.f64();
  c.goal_radius = r.f64();
  c.goal_dist = r.f64();
  c.trajectories.resize(count);
  for (auto& tr : c.trajectories) {
    tr.transform.rotation_deg = r.f64();
    tr.transform.shear = r.f64();
    tr.transform.scale_x = r.f64();
    tr.transform.scale_y = r.f64();
    tr.goal.x() = r.f64();
    tr.goal.y() = r.f64();
    tr.actions.resize(c.steps);
    for (auto& a : tr.actions) {
      a.shoulder_acc = r.f64();
      a.elbow_acc = r.f64();
    }
    tr.cursors.resize(c.steps + 1);
    for (auto& p : tr.cursors) {
      p.x() = r.f64();
      p.y() = r.f64();
    }
  }
  return c;
}

inline void corpus_to_csv(const CorpusFile& c, std::ostream& os) {
  os << "# corpus condition=" << condition_name(c.condition) << " seed=" << c.seed
     << " config_hash=" << c.config_hash << " format=" << kCorpusVersion << '\n';
  os << "trajectory,step,rotation_deg,shear,scale_x,scale_y,goal_x,goal_y,"
        "shoulder_acc,elbow_acc,cursor_x,cursor_y\n";
  for (std::size_t i = 0; i < c.trajectories.size(); ++i) {
    const auto& tr = c.trajectories[i];
    for (std::size_t t = 0; t < tr.cursors.size(); ++t) {
      os << i << ',' << t << ',' << tr.transform.rotation_deg << ',' << tr.transform.shear
         << ',' << tr.transform.scale_x << ',' << tr.transform.scale_y << ',' << tr.goal.x()
         << ',' << tr.goal.y() << ',';
      if (t < tr.actions.size()) {
        os << tr.actions[t].shoulder_acc << ',' << tr.actions[t].elbow_acc;
      } else {
        os << ',';
      }
      os << ',' << tr.cursors[t].x() << ',' << tr.cursors[t].y() << '\n';
    }
  }
}

// ---- checkpoints ----

inline constexpr char kCheckpointMagic[9] = "RMLCKPT1";
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::uint64_t config_hash = 0;
  std::uint64_t root_seed = 0;
  ForwardModel model;
};

inline void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  atomic_write(path, [&ck](std::ostream& os) {
    detail::BinWriter w(os);
    w.bytes(kCheckpointMagic, 8);
    w.u32(kCheckpointVersion);
    w.u64(ck.config_hash);
    w.u64(ck.root_seed);
    w.u64(ck.model.meta.seed);
    w.u8(ck.model.meta.condition == Condition::Rot ? 0 : 1);
    w.u32(ck.model.meta.corpus_size);
    const NetDims d = ck.model.dims();
    w.u32(static_cast<std::uint32_t>(d.input));
    w.u32(static_cast<std::uint32_t>(d.hidden));
    w.u32(static_cast<std::uint32_t>(d.output));
    w.f64(ck.model.norm.pos_cm);
    w.f64(ck.model.norm.act);
    w.u32(9);
    for_each_tensor(ck.model.weights, [&w](const char* name, const Eigen::MatrixXd& m) {
      w.str(name);
      w.u32(static_cast<std::uint32_t>(m.rows()));
      w.u32(static_cast<std::uint32_t>(m.cols()));
      w.bytes(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
    });
  });
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingInputError("cannot open checkpoint file: " + path.string());
  detail::BinReader r(is, path.string());
  r.expect_magic(kCheckpointMagic);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw std::runtime_error(path.string() + ": unsupported checkpoint version " +
                             std::to_string(version));
  }
  Checkpoint ck;
  ck.config_hash = r.u64();
  ck.root_seed = r.u64();
  ck.model.meta.seed = r.u64();
  ck.model.meta.condition = r.u8() == 0 ? Condition::Rot : Condition::RotPlus;
  ck.model.meta.corpus_size = r.u32();
  NetDims d;
  d.input = static_cast<int>(r.u32());
  d.hidden = static_cast<int>(r.u32());
  d.output = static_cast<int>(r.u32());
  ck.model.norm.pos_cm = r.f64();
  ck.model.norm.act = r.f64();
  const std::uint32_t tensors = r.u32();
  if (tensors != 9) {
    throw std::runtime_error(path.string() + ": unexpected tensor count");
  }
  ck.model.weights = WeightSet::zeros(d);
  for_each_tensor(ck.model.weights, [&r, &path](const char* name, Eigen::MatrixXd& m) {
    const std::string stored = r.str();
    const auto rows = static_cast<Eigen::Index>(r.u32());
    const auto cols = static_cast<Eigen::Index>(r.u32());
    if (stored != name || rows != m.rows() || cols != m.cols()) {
      throw std::runtime_error(path.string() + ": tensor layout mismatch at " + stored);
    }
    r.bytes(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
  });
  return ck;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw MissingInputError("cannot open file: " + path.string());
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return text;
}

}  // namespace reachml
