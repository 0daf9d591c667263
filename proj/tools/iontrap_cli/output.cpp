#include "output.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <system_error>

#include <openssl/evp.h>

namespace iontrap::cli {

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void Table::add(std::vector<double> row) {
  if (row.size() != columns.size()) throw std::logic_error("table row width mismatch");
  rows.push_back(std::move(row));
}

std::string Table::csv() const {
  std::string out;
  for (const auto& c : comments) out += "# " + c + "\n";
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (i) out += ",";
    out += columns[i];
  }
  out += "\n";
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i) out += ",";
      out += format_number(r[i]);
    }
    out += "\n";
  }
  return out;
}

void OutputSet::add_file(const std::string& name, std::string contents) {
  if (!files_.emplace(name, std::move(contents)).second) {
    throw std::logic_error("duplicate output file " + name);
  }
}

void OutputSet::add_table(const std::string& name, const Table& table) {
  add_file(name, table.csv());
}

void OutputSet::commit(const std::filesystem::path& dir) const {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw OutputError("cannot create output directory '" + dir.string() + "'");
  }
  std::vector<fs::path> written;
  auto rollback = [&] {
    for (const auto& p : written) fs::remove(p, ec);
  };
  for (const auto& [name, contents] : files_) {
    const fs::path final_path = dir / name;
    const fs::path tmp = dir / (name + ".partial");
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
      out.close();
      if (!out) {
        fs::remove(tmp, ec);
        rollback();
        throw OutputError("cannot write '" + final_path.string() + "'");
      }
    }
    fs::rename(tmp, final_path, ec);
    if (ec) {
      fs::remove(tmp, ec);
      rollback();
      throw OutputError("cannot write '" + final_path.string() + "'");
    }
    written.push_back(final_path);
  }
}

void Summary::add(const std::string& key, double value, const std::string& unit) {
  nlohmann::ordered_json j;
  if (std::isfinite(value)) {
    j["value"] = value;
  } else {
    j["value"] = format_number(value);
  }
  if (!unit.empty()) j["unit"] = unit;
  rows_.push_back({key, format_number(value), unit, j});
}

void Summary::add_text(const std::string& key, const std::string& value) {
  rows_.push_back({key, value, "", nlohmann::ordered_json(value)});
}

void Summary::add_flag(const std::string& key, bool value) {
  rows_.push_back({key, value ? "true" : "false", "", nlohmann::ordered_json(value)});
}

std::string Summary::text(const std::string& title) const {
  std::size_t width = 0;
  for (const auto& r : rows_) width = std::max(width, r.key.size());
  std::string out = title + "\n" + std::string(title.size(), '-') + "\n";
  for (const auto& r : rows_) {
    out += r.key + std::string(width - r.key.size() + 2, ' ') + r.value;
    if (!r.unit.empty()) out += " " + r.unit;
    out += "\n";
  }
  return out;
}

nlohmann::ordered_json Summary::json() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& r : rows_) j[r.key] = r.json;
  return j;
}

}  // namespace iontrap::cli
