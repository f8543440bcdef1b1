#ifndef GROUNDED_CORPUS_IO_H_
#define GROUNDED_CORPUS_IO_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>

#include "grounded/types.h"

namespace grounded {

// Schema or invariant violation in an input file.
class ParseError : public std::runtime_error {
 public:
  ParseError(int line, std::string field, const std::string& what);

  int line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  int line_;
  std::string field_;
};

// Provenance written into every artifact: hash of the effective config and
// the run seed. JSONL files carry it as a leading {"_meta": {...}} line,
// which readers skip.
struct ArtifactStamp {
  std::string config_hash;
  std::uint64_t seed = 0;
};

// One clip per line; lines holding only "_meta" are skipped. Validates the
// clip invariants and reports the offending line and field.
Corpus ParseCorpusJsonl(std::istream& in);

// Parses, then caps every clip to the 50 longest tracks.
Corpus IngestJsonl(const std::filesystem::path& path);

std::string ClipToJsonLine(const Clip& clip);
void WriteCorpusJsonl(const Corpus& corpus, std::ostream& out,
                      const std::optional<ArtifactStamp>& stamp = std::nullopt);
void ExportJsonl(const Corpus& corpus, const std::filesystem::path& path,
                 const std::optional<ArtifactStamp>& stamp = std::nullopt);

std::string MetaLine(const ArtifactStamp& stamp);

}  // namespace grounded

#endif  // GROUNDED_CORPUS_IO_H_
