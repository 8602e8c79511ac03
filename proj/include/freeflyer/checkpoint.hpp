#pragma once

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <string>

#include "freeflyer/net.hpp"
#include "freeflyer/tasks.hpp"

namespace ff::ckpt {

// Text checkpoint, one header block plus hexfloat parameters. Hexfloats
// round-trip bit-exactly, so a reloaded policy reproduces greedy actions.
struct Checkpoint {
  tasks::TaskKind task = tasks::TaskKind::go_to_xy;
  net::MlpSpec spec;
  std::string config_hash;
  Eigen::VectorXd in_scale;  // empty = all ones
  Eigen::VectorXd params;

  static Checkpoint of(const net::PolicyNet& n, tasks::TaskKind task,
                       std::string config_hash) {
    return Checkpoint{task, n.spec, std::move(config_hash), n.in_scale,
                      n.flatten()};
  }
};

inline void save_checkpoint(const std::filesystem::path& path,
                            const Checkpoint& c) {
  std::FILE* f = std::fopen(path.string().c_str(), "w");
  if (!f) throw IoError("cannot open checkpoint for writing: " + path.string());
  std::fprintf(f, "freeflyer-checkpoint v1\n");
  std::fprintf(f, "task=%s\n", std::string(tasks::task_name(c.task)).c_str());
  std::fprintf(f, "obs_dim=%d\n", c.spec.obs_dim);
  std::fprintf(f, "n_heads=%d\n", c.spec.n_heads);
  std::fprintf(f, "hidden=%d\n", c.spec.hidden);
  std::fprintf(f, "layers=%d\n", c.spec.layers);
  std::fprintf(f, "config_hash=%s\n", c.config_hash.c_str());
  std::fprintf(f, "in_scale=");
  for (Eigen::Index i = 0; i < c.in_scale.size(); ++i)
    std::fprintf(f, "%s%a", i ? " " : "", c.in_scale[i]);
  std::fprintf(f, "\n");
  std::fprintf(f, "params=%lld\n", static_cast<long long>(c.params.size()));
  for (Eigen::Index i = 0; i < c.params.size(); ++i)
    std::fprintf(f, "%a\n", c.params[i]);
  std::fprintf(f, "end\n");
  if (std::fclose(f) != 0)
    throw IoError("short write on checkpoint: " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::FILE* f = std::fopen(path.string().c_str(), "r");
  if (!f) throw IoError("cannot open checkpoint: " + path.string());
  auto fail = [&](const std::string& why) -> IoError {
    std::fclose(f);
    return IoError("bad checkpoint " + path.string() + ": " + why);
  };
  char line[4096];
  auto read_line = [&]() -> std::string {
    if (!std::fgets(line, sizeof line, f)) throw fail("truncated");
    std::string s(line);
    while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
    return s;
  };
  if (read_line() != "freeflyer-checkpoint v1") throw fail("unknown format");
  Checkpoint c;
  long long n_params = -1;
  for (;;) {
    std::string s = read_line();
    auto eq = s.find('=');
    if (eq == std::string::npos) throw fail("malformed header line: " + s);
    std::string key = s.substr(0, eq), val = s.substr(eq + 1);
    if (key == "task")
      c.task = tasks::parse_task_name(val);
    else if (key == "obs_dim")
      c.spec.obs_dim = std::stoi(val);
    else if (key == "n_heads")
      c.spec.n_heads = std::stoi(val);
    else if (key == "hidden")
      c.spec.hidden = std::stoi(val);
    else if (key == "layers")
      c.spec.layers = std::stoi(val);
    else if (key == "config_hash")
      c.config_hash = val;
    else if (key == "in_scale") {
      std::vector<double> vals;
      const char* p = val.c_str();
      char* end = nullptr;
      for (double v = std::strtod(p, &end); end != p;
           v = std::strtod(p, &end)) {
        vals.push_back(v);
        p = end;
      }
      c.in_scale = Eigen::Map<const Eigen::VectorXd>(
          vals.data(), static_cast<Eigen::Index>(vals.size()));
    } else if (key == "params") {
      n_params = std::stoll(val);
      break;
    } else {
      throw fail("unknown header key: " + key);
    }
  }
  if (n_params < 0 || n_params != net::param_count(c.spec))
    throw fail("parameter count does not match network shape");
  c.params.resize(n_params);
  for (long long i = 0; i < n_params; ++i) {
    double v;
    if (std::fscanf(f, "%la", &v) != 1) throw fail("truncated parameters");
    c.params[i] = v;
  }
  std::fscanf(f, " ");  // trailing newline
  if (!std::fgets(line, sizeof line, f) ||
      std::string(line).find("end") != 0)
    throw fail("missing end marker");
  std::fclose(f);
  return c;
}

inline net::PolicyNet to_net(const Checkpoint& c) {
  net::PolicyNet n = net::PolicyNet::init(c.spec, 0);
  n.unflatten(c.params);
  if (c.in_scale.size() == c.spec.obs_dim) n.in_scale = c.in_scale;
  return n;
}

}  // namespace ff::ckpt
