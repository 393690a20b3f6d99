#pragma once

#include <stdexcept>
#include <string>

namespace ledpose {

// Error taxonomy. Each family maps to a distinct CLI exit code (see tools/).
struct config_error : std::runtime_error {
  explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct dataset_error : std::runtime_error {
  enum class kind { missing_file, count_mismatch, malformed_label, bad_manifest };

  dataset_error(kind k, const std::string& msg) : std::runtime_error(msg), what_kind(k) {}

  kind what_kind;
};

struct train_error : std::runtime_error {
  explicit train_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct eval_error : std::runtime_error {
  explicit eval_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct domain_error : std::runtime_error {
  explicit domain_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace ledpose
