#include "gatedgeom/data.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gatedgeom/attention.hpp"
#include "gatedgeom/errors.hpp"
#include "gatedgeom/format.hpp"
#include "gatedgeom/rng.hpp"

namespace gatedgeom {

std::string format_number(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", value);
  return buf;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out << content;
    if (!out) throw Error("failed writing " + tmp.string());
  }
  fs::rename(tmp, target);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TaskKind parse_task_kind(const std::string& name) {
  if (name == "curved") return TaskKind::curved;
  if (name == "linear") return TaskKind::linear;
  throw ConfigError("unknown task '" + name + "'");
}

std::string to_string(TaskKind task) { return task == TaskKind::curved ? "curved" : "linear"; }

int curved_label(const Eigen::Vector2d& c) {
  const double r = c.norm();
  const double theta = std::atan2(c.y(), c.x());
  const double s = std::sin(2.5 * theta) + 0.6 * (r - 1.2);
  return s > 0.0 ? 1 : 0;
}

int linear_label(const Eigen::Vector2d& c, const Eigen::Vector2d& w) {
  if (w.x() == 0.0 && w.y() == 0.0) throw ConfigError("linear task direction must be nonzero");
  return w.dot(c) > 0.0 ? 1 : 0;
}

int label_for(const DatasetSpec& spec, const Eigen::Vector2d& center) {
  return spec.task == TaskKind::curved ? curved_label(center) : linear_label(center, spec.linear_w);
}

namespace {

std::vector<TaskSample> generate_split(const DatasetSpec& spec, int count, std::uint64_t seed,
                                       const char* split, std::uint64_t noise_salt) {
  // One stream per (split, sample index), so any partition of the index
  // range reproduces the same samples.
  const std::string center_tag = std::string(split) + "/center";
  const std::string noise_tag =
      std::string(split) + "/noise/" + std::to_string(noise_salt);
  std::vector<TaskSample> out(count);
  for (int i = 0; i < count; ++i) {
    CounterRng crng(seed, center_tag, static_cast<std::uint64_t>(i));
    TaskSample s;
    s.center.x() = crng.uniform(spec.box_lo, spec.box_hi);
    s.center.y() = crng.uniform(spec.box_lo, spec.box_hi);
    s.label = label_for(spec, s.center);
    CounterRng nrng(seed, noise_tag, static_cast<std::uint64_t>(i));
    s.tokens.resize(spec.seq_len, 2);
    for (int t = 0; t < spec.seq_len; ++t) {
      s.tokens(t, 0) = s.center.x() + spec.noise_sigma * nrng.normal();
      s.tokens(t, 1) = s.center.y() + spec.noise_sigma * nrng.normal();
    }
    out[i] = std::move(s);
  }
  return out;
}

}  // namespace

Dataset generate(const DatasetSpec& spec, std::uint64_t seed, std::uint64_t noise_salt) {
  if (spec.seq_len < 1 || spec.n_train < 0 || spec.n_test < 0 || !(spec.box_hi > spec.box_lo)) {
    throw ConfigError("invalid dataset settings");
  }
  Dataset d;
  d.train = generate_split(spec, spec.n_train, seed, "train", noise_salt);
  d.test = generate_split(spec, spec.n_test, seed, "test", noise_salt);
  return d;
}

Eigen::MatrixXd stack_tokens(const std::vector<TaskSample>& samples,
                             const std::vector<std::size_t>& indices) {
  if (indices.empty()) return Eigen::MatrixXd(0, 2);
  const Eigen::Index n = samples[indices.front()].tokens.rows();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(indices.size()) * n, 2);
  for (std::size_t b = 0; b < indices.size(); ++b) {
    out.middleRows(static_cast<Eigen::Index>(b) * n, n) = samples[indices[b]].tokens;
  }
  return out;
}

std::vector<GridPoint> latent_grid(const DatasetSpec& spec, int resolution,
                                   const ModelParams* model) {
  if (resolution < 2) throw ConfigError("grid resolution must be at least 2");
  std::vector<GridPoint> grid;
  grid.reserve(static_cast<std::size_t>(resolution) * resolution);
  const double step = (spec.box_hi - spec.box_lo) / (resolution - 1);
  for (int iy = 0; iy < resolution; ++iy) {
    for (int ix = 0; ix < resolution; ++ix) {
      GridPoint g;
      g.center = Eigen::Vector2d(spec.box_lo + ix * step, spec.box_lo + iy * step);
      g.true_label = label_for(spec, g.center);
      grid.push_back(g);
    }
  }
  if (model) {
    // Batched evaluation of the noiseless constant sequences.
    const int n = spec.seq_len;
    const std::size_t chunk = 1024;
    for (std::size_t start = 0; start < grid.size(); start += chunk) {
      const std::size_t stop = std::min(grid.size(), start + chunk);
      Eigen::MatrixXd stacked(static_cast<Eigen::Index>(stop - start) * n, 2);
      for (std::size_t i = start; i < stop; ++i) {
        for (int t = 0; t < n; ++t) stacked.row(static_cast<Eigen::Index>(i - start) * n + t) = grid[i].center.transpose();
      }
      const Eigen::MatrixXd logits = model_forward_batch(stacked, n, *model);
      for (std::size_t i = start; i < stop; ++i) {
        const Eigen::Index r = static_cast<Eigen::Index>(i - start);
        grid[i].logits = Eigen::Vector2d(logits(r, 0), logits(r, 1));
        grid[i].pred_label = logits(r, 1) > logits(r, 0) ? 1 : 0;
      }
    }
  }
  return grid;
}

std::string dataset_csv(const std::vector<TaskSample>& samples) {
  std::ostringstream out;
  out << "center_x,center_y,label";
  const int n = samples.empty() ? 0 : static_cast<int>(samples.front().tokens.rows());
  for (int t = 0; t < n; ++t) out << ",token_" << t << "_x,token_" << t << "_y";
  out << '\n';
  for (const auto& s : samples) {
    out << format_number(s.center.x()) << ',' << format_number(s.center.y()) << ',' << s.label;
    for (int t = 0; t < n; ++t) {
      out << ',' << format_number(s.tokens(t, 0)) << ',' << format_number(s.tokens(t, 1));
    }
    out << '\n';
  }
  return out.str();
}

std::string grid_csv(const std::vector<GridPoint>& grid) {
  std::ostringstream out;
  out << "center_x,center_y,true_label,pred_label,logit_0,logit_1\n";
  for (const auto& g : grid) {
    out << format_number(g.center.x()) << ',' << format_number(g.center.y()) << ','
        << g.true_label << ',';
    if (g.pred_label) {
      out << *g.pred_label << ',' << format_number(g.logits->x()) << ','
          << format_number(g.logits->y());
    } else {
      out << ",,";
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace gatedgeom
