#pragma once

// Record-parallel map over a JSONL stream that hands results to a sink in
// input order. Lines are read in batches so memory stays bounded by the batch,
// not the corpus.

#include <cstddef>
#include <exception>
#include <istream>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace ipakit::cli {

/// Bad input data. Usually tied to a record (its id or "line N"); whole-input
/// failures such as an unreadable table name a file or stream instead.
class DataError : public std::runtime_error {
 public:
  DataError(std::string record, const std::string& message)
      : std::runtime_error(message), subject_(std::move(record)) {}

  static DataError about(std::string subject, const std::string& message) {
    DataError e(std::move(subject), message);
    e.record_level_ = false;
    return e;
  }

  const std::string& subject() const { return subject_; }
  bool record_level() const { return record_level_; }

 private:
  std::string subject_;
  bool record_level_ = true;
};

struct Line {
  std::size_t number = 0;  // 1-based
  std::string text;
};

// map(line, worker_index) -> T may throw DataError; the first failure in input
// order is rethrown after every earlier result has reached the sink.
template <class T, class Map, class Sink>
void ordered_map(std::istream& in, std::size_t jobs, Map&& map, Sink&& sink) {
  jobs = std::max<std::size_t>(jobs, 1);
  const std::size_t batch_size = 256 * jobs;
  std::size_t line_number = 0;
  std::vector<Line> batch;
  std::string text;

  auto flush = [&] {
    std::vector<std::optional<T>> results(batch.size());
    std::vector<std::exception_ptr> errors(batch.size());
    auto work = [&](std::size_t worker) {
      for (std::size_t i = worker; i < batch.size(); i += jobs) {
        try {
          results[i].emplace(map(batch[i], worker));
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    };
    if (jobs == 1 || batch.size() < 2) {
      work(0);
      for (std::size_t i = 0; i < batch.size(); ++i) {
        if (errors[i]) std::rethrow_exception(errors[i]);
        sink(std::move(*results[i]));
      }
    } else {
      std::vector<std::thread> threads;
      for (std::size_t w = 0; w < jobs; ++w) threads.emplace_back(work, w);
      for (auto& t : threads) t.join();
      for (std::size_t i = 0; i < batch.size(); ++i) {
        if (errors[i]) std::rethrow_exception(errors[i]);
        sink(std::move(*results[i]));
      }
    }
    batch.clear();
  };

  while (std::getline(in, text)) {
    ++line_number;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.find_first_not_of(" \t") == std::string::npos) continue;
    batch.push_back({line_number, std::move(text)});
    if (batch.size() == batch_size) flush();
  }
  flush();
}

}  // namespace ipakit::cli
