#include "dhc/artifacts.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <sstream>
#include <stdexcept>

namespace dhc {

std::string g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : f_(path) {
  if (!f_) throw std::runtime_error("cannot open " + path);
  row(header);
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) f_ << ',';
    f_ << cells[i];
  }
  f_ << '\n';
}

void CsvWriter::close() { f_.close(); }

Manifest::Manifest(std::string dir, std::string config_hash)
    : dir_(std::move(dir)), config_hash_(std::move(config_hash)) {}

void Manifest::add(const std::string& name) {
  std::ifstream f(dir_ + "/" + name, std::ios::binary);
  if (!f) throw std::runtime_error("manifest: artifact missing: " + name);
  std::stringstream ss;
  ss << f.rdbuf();
  const std::string bytes = ss.str();
  entries_.push_back({name, bytes.size(), fnv1a(bytes)});
}

void Manifest::add_check(const std::string& name, bool pass, const std::string& detail) {
  checks_.push_back({name, detail, pass});
}

void Manifest::add_timing(const std::string& name, double seconds) {
  timings_.emplace_back(name, seconds);
}

bool Manifest::all_checks_pass() const {
  for (const auto& c : checks_)
    if (!c.pass) return false;
  return true;
}

void Manifest::write(const std::string& name) const {
  nlohmann::ordered_json j;
  j["version"] = "dhc 0.1.0";
  j["config_hash"] = config_hash_;
  auto arts = nlohmann::ordered_json::array();
  for (const auto& e : entries_) {
    char hash[24];
    std::snprintf(hash, sizeof hash, "%016llx", (unsigned long long)e.hash);
    arts.push_back({{"name", e.name}, {"bytes", e.bytes}, {"fnv64", hash}});
  }
  j["artifacts"] = arts;
  auto checks = nlohmann::ordered_json::array();
  for (const auto& c : checks_)
    checks.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
  j["checks"] = checks;
  auto times = nlohmann::ordered_json::object();
  for (const auto& [k, v] : timings_) times[k] = v;
  j["timings_s"] = times;

  std::ofstream f(dir_ + "/" + name);
  if (!f) throw std::runtime_error("cannot write manifest");
  f << j.dump(2) << '\n';
}

} // namespace dhc
