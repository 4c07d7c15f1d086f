#pragma once

#include <stdexcept>
#include <string>

namespace tnfs {

// Every error raised by the library derives from tnfs::Error so the CLI can
// map it onto a process exit code without string matching.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments, dimension mismatches, malformed files.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A rollout or gradient pass produced a non-finite intermediate.
class NumericOverflow : public Error {
 public:
  NumericOverflow(const std::string& what, std::size_t sequence_index)
      : Error(what), sequence_index_(sequence_index) {}

  std::size_t sequence_index() const noexcept { return sequence_index_; }

 private:
  std::size_t sequence_index_;
};

// Training loss became non-finite.
class Divergence : public Error {
 public:
  Divergence(const std::string& what, int last_finite_epoch)
      : Error(what), last_finite_epoch_(last_finite_epoch) {}

  // -1 when not even the initial loss was finite.
  int last_finite_epoch() const noexcept { return last_finite_epoch_; }

 private:
  int last_finite_epoch_;
};

// Clustering input that cannot support the requested number of clusters.
class DegenerateData : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// A validity index requested where it is not defined (c = 1).
class UndefinedIndex : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// Model archive written by an incompatible format version.
class VersionMismatch : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace tnfs
