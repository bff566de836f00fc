#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dymon/errors.hpp"
#include "dymon/matrix.hpp"
#include "dymon/model.hpp"
#include "dymon/systems.hpp"
#include "dymon/transitions.hpp"

namespace dymon {

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

inline double parse_field_double(const std::string& s, std::size_t row) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw parse_error("csv: bad number '" + s + "' at row " +
                      std::to_string(row));
  }
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open " + path + " for writing");
  f << text;
  if (!f) throw io_error("write failed for " + path);
}

inline std::vector<std::string> csv_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::string cur;
  for (char ch : text) {
    if (ch == '\n') {
      lines.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) lines.push_back(cur);
  return lines;
}

}  // namespace detail

// Trajectory CSV: header "t,x0,...,x{d-1}", one row per state.
inline std::string trajectory_to_csv(const Trajectory& traj) {
  std::ostringstream os;
  os << 't';
  for (std::size_t k = 0; k < traj.states.cols(); ++k) os << ",x" << k;
  os << '\n';
  for (std::size_t t = 0; t < traj.states.rows(); ++t) {
    os << t;
    for (std::size_t k = 0; k < traj.states.cols(); ++k)
      os << ',' << detail::fmt17(traj.states(t, k));
    os << '\n';
  }
  return os.str();
}

inline Trajectory trajectory_from_csv(const std::string& text) {
  const auto lines = detail::csv_lines(text);
  if (lines.empty()) throw parse_error("trajectory csv: empty file");
  const auto header = detail::split_csv_line(lines[0]);
  if (header.size() < 2 || header[0] != "t")
    throw parse_error("trajectory csv: bad header at row 0");
  const std::size_t d = header.size() - 1;
  for (std::size_t k = 0; k < d; ++k)
    if (header[k + 1] != "x" + std::to_string(k))
      throw parse_error("trajectory csv: bad header at row 0");
  Trajectory traj;
  traj.states = Matrix(lines.size() - 1, d);
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto fields = detail::split_csv_line(lines[r]);
    if (fields.size() != d + 1)
      throw parse_error("trajectory csv: wrong field count at row " +
                        std::to_string(r));
    for (std::size_t k = 0; k < d; ++k)
      traj.states(r - 1, k) = detail::parse_field_double(fields[k + 1], r);
  }
  return traj;
}

inline void write_trajectory_csv(const Trajectory& traj,
                                 const std::string& path) {
  detail::write_text_file(path, trajectory_to_csv(traj));
}

inline Trajectory read_trajectory_csv(const std::string& path) {
  return trajectory_from_csv(detail::read_text_file(path));
}

// Transitions CSV: header "group_id,role,x0,...", role is history0..history{n-1}
// or target.
inline std::string transitions_to_csv(const TransitionDataset& ds) {
  std::ostringstream os;
  os << "group_id,role";
  for (std::size_t k = 0; k < ds.state_dim; ++k) os << ",x" << k;
  os << '\n';
  for (std::size_t gi = 0; gi < ds.groups.size(); ++gi) {
    const auto& g = ds.groups[gi];
    for (std::size_t h = 0; h < g.history.rows(); ++h) {
      os << gi << ",history" << h;
      for (std::size_t k = 0; k < ds.state_dim; ++k)
        os << ',' << detail::fmt17(g.history(h, k));
      os << '\n';
    }
    for (std::size_t t = 0; t < g.targets.rows(); ++t) {
      os << gi << ",target";
      for (std::size_t k = 0; k < ds.state_dim; ++k)
        os << ',' << detail::fmt17(g.targets(t, k));
      os << '\n';
    }
  }
  return os.str();
}

inline TransitionDataset transitions_from_csv(const std::string& text) {
  const auto lines = detail::csv_lines(text);
  if (lines.empty()) throw parse_error("transitions csv: empty file");
  const auto header = detail::split_csv_line(lines[0]);
  if (header.size() < 3 || header[0] != "group_id" || header[1] != "role")
    throw parse_error("transitions csv: bad header at row 0");
  const std::size_t d = header.size() - 2;

  struct RawGroup {
    std::vector<std::vector<double>> history;
    std::vector<std::vector<double>> targets;
  };
  std::vector<RawGroup> raw;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto fields = detail::split_csv_line(lines[r]);
    if (fields.size() != d + 2)
      throw parse_error("transitions csv: wrong field count at row " +
                        std::to_string(r));
    std::size_t gid;
    try {
      gid = std::stoull(fields[0]);
    } catch (const std::exception&) {
      throw parse_error("transitions csv: bad group id at row " +
                        std::to_string(r));
    }
    if (gid >= raw.size()) raw.resize(gid + 1);
    std::vector<double> vals(d);
    for (std::size_t k = 0; k < d; ++k)
      vals[k] = detail::parse_field_double(fields[k + 2], r);
    const std::string& role = fields[1];
    if (role == "target") {
      raw[gid].targets.push_back(std::move(vals));
    } else if (role.rfind("history", 0) == 0) {
      std::size_t hidx;
      try {
        hidx = std::stoull(role.substr(7));
      } catch (const std::exception&) {
        throw parse_error("transitions csv: bad role at row " +
                          std::to_string(r));
      }
      if (raw[gid].history.size() <= hidx) raw[gid].history.resize(hidx + 1);
      raw[gid].history[hidx] = std::move(vals);
    } else {
      throw parse_error("transitions csv: bad role '" + role + "' at row " +
                        std::to_string(r));
    }
  }
  if (raw.empty()) throw parse_error("transitions csv: no data rows");
  TransitionDataset ds;
  ds.state_dim = d;
  ds.order = raw[0].history.size();
  ds.provenance = "csv";
  for (std::size_t gi = 0; gi < raw.size(); ++gi) {
    const auto& rg = raw[gi];
    if (rg.history.size() != ds.order || rg.targets.empty())
      throw parse_error("transitions csv: group " + std::to_string(gi) +
                        " is incomplete");
    TransitionGroup g;
    g.history = Matrix(ds.order, d);
    for (std::size_t h = 0; h < ds.order; ++h) {
      if (rg.history[h].size() != d)
        throw parse_error("transitions csv: group " + std::to_string(gi) +
                          " is missing history" + std::to_string(h));
      for (std::size_t k = 0; k < d; ++k) g.history(h, k) = rg.history[h][k];
    }
    g.targets = Matrix(rg.targets.size(), d);
    for (std::size_t t = 0; t < rg.targets.size(); ++t)
      for (std::size_t k = 0; k < d; ++k) g.targets(t, k) = rg.targets[t][k];
    ds.groups.push_back(std::move(g));
  }
  ds.validate();
  return ds;
}

inline void write_transitions_csv(const TransitionDataset& ds,
                                  const std::string& path) {
  detail::write_text_file(path, transitions_to_csv(ds));
}

inline TransitionDataset read_transitions_csv(const std::string& path) {
  return transitions_from_csv(detail::read_text_file(path));
}

}  // namespace dymon
