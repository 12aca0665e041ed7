#include "css/trajectory.hpp"

namespace css {

void Trajectory::validate() const {
  require(dt > 0.0, "trajectory dt must be positive");
  require(values.rows() > 0 && values.cols() > 0, "trajectory is empty");
  require(channel_names.empty() ||
              static_cast<Eigen::Index>(channel_names.size()) == values.rows(),
          "channel name count does not match channel count");
  if (!values.allFinite())
    throw InvalidInputError("trajectory contains non-finite samples");
}

Trajectory normalize(const Trajectory& raw) {
  raw.validate();
  const Eigen::Index d = raw.dims();
  const auto n = static_cast<double>(raw.n_samples());

  Normalization frame;
  frame.mean = raw.values.rowwise().mean();
  frame.std.resize(d);

  Trajectory out = raw;
  for (Eigen::Index i = 0; i < d; ++i) {
    const auto centered = raw.values.row(i).array() - frame.mean(i);
    const double sd = std::sqrt(centered.square().sum() / n);
    const double scale = std::abs(frame.mean(i)) + 1.0;
    if (!(sd > scale * 1e-13)) {
      const std::string name = raw.channel_names.empty()
                                   ? "channel " + std::to_string(i)
                                   : raw.channel_names[i];
      throw DegenerateChannelError(name + " has zero variance");
    }
    frame.std(i) = sd;
    out.values.row(i) = centered / sd;
  }
  out.normalization = frame;
  return out;
}

Trajectory slice(const Trajectory& t, Eigen::Index first, Eigen::Index count) {
  require(first >= 0 && count > 0 && first + count <= t.n_samples(),
          "trajectory slice out of range");
  Trajectory out;
  out.dt = t.dt;
  out.channel_names = t.channel_names;
  out.normalization = t.normalization;
  out.values = t.values.middleCols(first, count);
  return out;
}

void write_csv(const Trajectory& t, const std::string& path) {
  t.validate();
  std::string text;
  text.reserve(static_cast<std::size_t>(t.values.size()) * 20 + 64);
  text += "t";
  for (Eigen::Index i = 0; i < t.dims(); ++i) {
    text += ',';
    text += t.channel_names.empty() ? "c" + std::to_string(i)
                                    : t.channel_names[i];
  }
  text += '\n';
  for (Eigen::Index j = 0; j < t.n_samples(); ++j) {
    text += format_double(t.dt * static_cast<double>(j));
    for (Eigen::Index i = 0; i < t.dims(); ++i) {
      text += ',';
      text += format_double(t.values(i, j));
    }
    text += '\n';
  }
  write_file_atomic(path, text);
}

void write_binary(const Trajectory& t, const std::string& path) {
  t.validate();
  ByteWriter w;
  w.magic("TRJ1");
  w.u32(static_cast<std::uint32_t>(t.dims()));
  w.u64(static_cast<std::uint64_t>(t.n_samples()));
  w.f64(t.dt);
  for (Eigen::Index i = 0; i < t.dims(); ++i)
    w.str(t.channel_names.empty() ? "c" + std::to_string(i)
                                  : t.channel_names[i]);
  for (Eigen::Index i = 0; i < t.dims(); ++i)
    for (Eigen::Index j = 0; j < t.n_samples(); ++j) w.f64(t.values(i, j));
  write_file_atomic(path, w.data());
}

Trajectory read_binary_trajectory(const std::string& path) {
  const std::string data = read_file(path);
  ByteReader r(data, path);
  r.expect_magic("TRJ1");
  const std::uint32_t d = r.u32();
  const std::uint64_t n = r.u64();
  Trajectory t;
  t.dt = r.f64();
  require(d > 0 && n > 0, "empty trajectory in " + path);
  t.channel_names.resize(d);
  for (auto& name : t.channel_names) name = r.str();
  t.values.resize(d, static_cast<Eigen::Index>(n));
  for (std::uint32_t i = 0; i < d; ++i)
    for (std::uint64_t j = 0; j < n; ++j)
      t.values(i, static_cast<Eigen::Index>(j)) = r.f64();
  if (!r.at_end()) throw InvalidInputError("trailing bytes in " + path);
  t.validate();
  return t;
}

}  // namespace css
