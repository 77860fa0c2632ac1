#ifndef EHTRAIN_PROFILE_IO_HPP
#define EHTRAIN_PROFILE_IO_HPP

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ehtrain/energy_model.hpp"

namespace ehtrain {

/// Malformed input file or configuration.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File could not be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace io_detail {

inline std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open '" + path + "'");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace io_detail

/// Parses {"energies": [numbers]}.
inline EnergyProfile parse_profile_json(const std::string& text, const std::string& origin = "<json>") {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(origin + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("energies")) {
    throw FormatError(origin + ": expected an object with field \"energies\"");
  }
  const auto& arr = doc.at("energies");
  if (!arr.is_array()) {
    throw FormatError(origin + ": field \"energies\" must be an array");
  }
  std::vector<double> energies;
  energies.reserve(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) {
      throw FormatError(origin + ": energies[" + std::to_string(i) + "] is not a number");
    }
    energies.push_back(arr[i].get<double>());
  }
  try {
    return EnergyProfile(std::move(energies));
  } catch (const std::invalid_argument& e) {
    throw FormatError(origin + ": " + e.what());
  }
}

/// Parses a one-column CSV with header "energy" and one value per line.
inline EnergyProfile parse_profile_csv(const std::string& text, const std::string& origin = "<csv>") {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::vector<double> energies;
  while (std::getline(in, line)) {
    ++line_no;
    line = io_detail::trim(line);
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != "energy") {
        throw FormatError(origin + ":" + std::to_string(line_no) +
                          ": expected header \"energy\", got \"" + line + "\"");
      }
      header_seen = true;
      continue;
    }
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), value);
    if (ec != std::errc() || ptr != line.data() + line.size()) {
      throw FormatError(origin + ":" + std::to_string(line_no) + ": \"" + line +
                        "\" is not a number");
    }
    energies.push_back(value);
  }
  if (!header_seen) {
    throw FormatError(origin + ": empty file, expected header \"energy\"");
  }
  try {
    return EnergyProfile(std::move(energies));
  } catch (const std::invalid_argument& e) {
    throw FormatError(origin + ": " + e.what());
  }
}

/// Loads a profile file; JSON when the first non-blank character is '{',
/// CSV otherwise.
inline EnergyProfile load_profile(const std::string& path) {
  const std::string text = io_detail::read_file(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    return parse_profile_json(text, path);
  }
  return parse_profile_csv(text, path);
}

}  // namespace ehtrain

#endif  // EHTRAIN_PROFILE_IO_HPP
