#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace apex {

// Bad caller input. `field()` names the offending parameter when there is one
// (calibration bounds, for instance) so the service can report it.
class InvalidArgument : public std::invalid_argument {
 public:
  explicit InvalidArgument(const std::string& what, std::string field = {})
      : std::invalid_argument(what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class RenderError : public std::runtime_error {
 public:
  RenderError(const std::string& what, std::string spec_id)
      : std::runtime_error(what + " (spec " + spec_id + ")"), spec_id_(std::move(spec_id)) {}
  const std::string& spec_id() const noexcept { return spec_id_; }

 private:
  std::string spec_id_;
};

class CorpusWriteError : public std::runtime_error {
 public:
  CorpusWriteError(const std::string& what, std::string entry)
      : std::runtime_error(what + " (entry " + entry + ")"), entry_(std::move(entry)) {}
  const std::string& entry() const noexcept { return entry_; }

 private:
  std::string entry_;
};

class ModelConfigError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class InputError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class TrainingAborted : public std::runtime_error {
 public:
  TrainingAborted(const std::string& what, std::string last_good_checkpoint)
      : std::runtime_error(what), last_good_(std::move(last_good_checkpoint)) {}
  const std::string& last_good_checkpoint() const noexcept { return last_good_; }

 private:
  std::string last_good_;
};

}  // namespace apex
