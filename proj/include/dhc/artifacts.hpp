#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace dhc {

// 17 significant digits: doubles round-trip exactly through the text artifacts.
std::string g17(double x);

std::uint64_t fnv1a(const std::string& bytes);

// CSV with a fixed dialect: comma, '.' decimal, header row.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);
  void row(const std::vector<std::string>& cells);
  void close();

 private:
  std::ofstream f_;
};

// Records every artifact of a run: file name, size and content hash, plus the
// configuration hash and timings. Timings are excluded from determinism
// comparisons; artifact hashes are the reproducibility contract.
class Manifest {
 public:
  Manifest(std::string dir, std::string config_hash);
  void add(const std::string& name); // file must exist under dir
  void add_check(const std::string& name, bool pass, const std::string& detail);
  void add_timing(const std::string& name, double seconds);
  bool all_checks_pass() const;
  void write(const std::string& name = "manifest.json") const;

 private:
  std::string dir_, config_hash_;
  struct Entry {
    std::string name;
    std::size_t bytes;
    std::uint64_t hash;
  };
  struct Check {
    std::string name, detail;
    bool pass;
  };
  std::vector<Entry> entries_;
  std::vector<Check> checks_;
  std::vector<std::pair<std::string, double>> timings_;
};

} // namespace dhc
