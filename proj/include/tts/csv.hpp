#pragma once

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "tts/common.hpp"
#include "tts/engine.hpp"

namespace tts {

// Trajectory CSV schema (stable): header `k,alpha,beta,metric,aux_error,stable`,
// floats with 17 significant digits (round-trip exact), empty field when a
// value was not evaluated, stable as 0/1.

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string records_to_csv(const std::vector<RunRecord>& records) {
  std::string out = "k,alpha,beta,metric,aux_error,stable\n";
  for (const RunRecord& r : records) {
    out += std::to_string(r.k);
    out += ',';
    out += format_double(r.alpha);
    out += ',';
    out += format_double(r.beta);
    out += ',';
    if (r.metric) out += format_double(*r.metric);
    out += ',';
    if (r.aux_error) out += format_double(*r.aux_error);
    out += ',';
    out += r.stable ? '1' : '0';
    out += '\n';
  }
  return out;
}

inline void write_records_csv(const std::string& path, const std::vector<RunRecord>& records) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path);
  f << records_to_csv(records);
  if (!f) throw IoError("write failed: " + path);
}

inline std::vector<RunRecord> read_records_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open: " + path);
  std::string line;
  if (!std::getline(f, line)) throw IoError(path + ": empty file");
  if (line != "k,alpha,beta,metric,aux_error,stable")
    throw IoError(path + ": unexpected header");

  std::vector<RunRecord> records;
  std::int64_t row = 1;
  while (std::getline(f, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        fields.push_back(line.substr(start, i - start));
        start = i + 1;
      }
    }
    if (fields.size() != 6)
      throw IoError(path + ": row " + std::to_string(row) + ": expected 6 fields");
    try {
      RunRecord r;
      r.k = std::stoll(fields[0]);
      r.alpha = std::stod(fields[1]);
      r.beta = std::stod(fields[2]);
      if (!fields[3].empty()) r.metric = std::stod(fields[3]);
      if (!fields[4].empty()) r.aux_error = std::stod(fields[4]);
      if (fields[5] != "0" && fields[5] != "1")
        throw IoError(path + ": row " + std::to_string(row) + ": bad stable flag");
      r.stable = fields[5] == "1";
      records.push_back(r);
    } catch (const IoError&) {
      throw;
    } catch (const std::exception&) {
      throw IoError(path + ": row " + std::to_string(row) + ": parse error");
    }
  }
  return records;
}

}  // namespace tts
