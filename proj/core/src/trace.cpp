// Copyright 2026 The sepdiff Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "sepdiff/separator.hpp"

namespace sepdiff {

namespace {

const char* const kColumns[] = {"step",      "source", "loss",           "loss_time", "loss_group",
                                "loss_stft", "gamma",  "grad_norm", "guidance_bound", "x0_energy"};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream s(line);
  while (std::getline(s, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double to_double(const std::string& cell, std::size_t row) {
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used != cell.size()) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    throw SchemaError("trace row " + std::to_string(row) + ": cannot parse '" + cell + "'");
  }
}

}  // namespace

void GuidanceTrace::write_csv(std::ostream& out) const {
  const bool with_sdr = !records.empty() && records.front().si_sdr.has_value();
  for (std::size_t c = 0; c < std::size(kColumns); ++c) out << (c ? "," : "") << kColumns[c];
  if (with_sdr) out << ",si_sdr";
  out << "\n";
  char buf[512];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", r.step, r.source, r.loss,
                  r.loss_time, r.loss_group, r.loss_stft, r.gamma, r.grad_norm, r.guidance_bound, r.x0_energy);
    out << buf;
    if (with_sdr) {
      std::snprintf(buf, sizeof(buf), ",%.17g", r.si_sdr.value_or(std::nan("")));
      out << buf;
    }
    out << "\n";
  }
}

void GuidanceTrace::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot open " + path.string() + " for writing");
  write_csv(out);
}

GuidanceTrace GuidanceTrace::read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("trace is empty");
  const auto header = split(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* name : kColumns) {
    if (!col.count(name)) throw SchemaError(std::string("trace is missing column '") + name + "'");
  }
  const bool with_sdr = col.count("si_sdr") > 0;
  GuidanceTrace t;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) throw SchemaError("trace row " + std::to_string(row) + " has wrong arity");
    auto at = [&](const char* name) { return to_double(cells[col.at(name)], row); };
    TraceRecord r;
    r.step = static_cast<int>(at("step"));
    r.source = static_cast<int>(at("source"));
    r.loss = at("loss");
    r.loss_time = at("loss_time");
    r.loss_group = at("loss_group");
    r.loss_stft = at("loss_stft");
    r.gamma = at("gamma");
    r.grad_norm = at("grad_norm");
    r.guidance_bound = at("guidance_bound");
    r.x0_energy = at("x0_energy");
    if (with_sdr) r.si_sdr = at("si_sdr");
    t.records.push_back(r);
  }
  return t;
}

GuidanceTrace GuidanceTrace::read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open trace " + path.string());
  return read_csv(in);
}

}  // namespace sepdiff
