#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "hmdlf/data.hpp"
#include "oracles.hpp"

using namespace hmdlf;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  out << text;
}

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) : path("test_data_" + name) {}
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("iso-8601 parsing and formatting") {
  const std::int64_t t = parse_iso8601("2013-01-07T00:15:00");
  CHECK(format_iso8601(t) == "2013-01-07T00:15:00");
  CHECK(parse_iso8601("2013-01-07 00:15:00") == t);
  CHECK(parse_iso8601("2013-01-07T00:15:00Z") == t);
  CHECK(parse_iso8601("1970-01-01T00:00:00") == 0);
  CHECK_THROWS_AS(parse_iso8601("07/01/2013 00:15"), DataError);
  CHECK_THROWS_AS(parse_iso8601("2013-13-07T00:15:00"), DataError);
  CHECK_THROWS_AS(parse_iso8601("2013-01-07T00:15:00junk"), DataError);
}

TEST_CASE("format_double is the shortest exact representation") {
  for (double v : {0.0, 1.0, 0.5, 132.513, -7.25, 1.0 / 3.0, 1e-12}) {
    const std::string text = format_double(v);
    CHECK(std::strtod(text.c_str(), nullptr) == v);
  }
  CHECK(format_double(80.0) == "80");
  CHECK(format_double(0.5) == "0.5");
}

TEST_CASE("ingest reads a well-formed file") {
  TempFile f("ok.csv");
  spit(f.path,
       "timestamp,flow,speed,journey_time\n"
       "2013-01-07T00:00:00,80,90,3.3\n"
       "2013-01-07T00:15:00,81,89,3.4\n"
       "2013-01-07T00:30:00,82,88,3.5\n"
       "2013-01-07T00:45:00,83,87,3.6\n");
  IngestResult r = ingest_csv(f.path);
  CHECK(r.data.count() == 4);
  CHECK(r.data.names == std::vector<std::string>{"flow", "speed", "journey_time"});
  CHECK(r.data.series("flow")(3) == 83.0);
  CHECK(r.data.interval_seconds() == 900);
  CHECK(r.warnings.empty());
}

TEST_CASE("ingest sorts rows and maps renamed headers") {
  TempFile f("schema.csv");
  spit(f.path,
       "When,AvgJT,Fl,Sp\n"
       "2013-01-07T00:15:00,3.4,81,89\n"
       "2013-01-07T00:00:00,3.3,80,90\n");
  CsvSchema schema;
  schema.timestamp_column = "When";
  schema.value_columns = {{"flow", "Fl"}, {"speed", "Sp"}, {"journey_time", "AvgJT"}};
  IngestResult r = ingest_csv(f.path, schema);
  CHECK(r.data.count() == 2);
  CHECK(r.data.series("flow")(0) == 80.0);
  CHECK(r.data.series("journey_time")(1) == 3.4);
}

TEST_CASE("ingest interpolates an isolated single-record gap") {
  TempFile f("gap.csv");
  spit(f.path,
       "timestamp,flow,speed,journey_time\n"
       "2013-01-07T00:00:00,80,90,3.0\n"
       "2013-01-07T00:15:00,82,88,3.2\n"
       "2013-01-07T00:45:00,86,84,3.6\n");  // 00:30 missing
  IngestResult r = ingest_csv(f.path);
  CHECK(r.data.count() == 4);
  CHECK(r.data.series("flow")(2) == doctest::Approx(84.0));  // midpoint
  CHECK(r.data.series("speed")(2) == doctest::Approx(86.0));
  CHECK(r.data.timestamps[2] == parse_iso8601("2013-01-07T00:30:00"));
  REQUIRE(r.warnings.size() == 1);
  CHECK(r.warnings[0].find("interpolated") != std::string::npos);
}

TEST_CASE("ingest keeps the longest segment across a long gap") {
  std::ostringstream csv;
  csv << "timestamp,flow,speed,journey_time\n";
  for (int i = 0; i < 3; ++i)
    csv << format_iso8601(parse_iso8601("2013-01-07T00:00:00") + 900 * i) << ",80,90,3\n";
  for (int i = 0; i < 8; ++i)
    csv << format_iso8601(parse_iso8601("2013-01-09T00:00:00") + 900 * i) << ",81,89,3\n";
  TempFile f("segments.csv");
  spit(f.path, csv.str());
  IngestResult r = ingest_csv(f.path);
  CHECK(r.data.count() == 8);
  CHECK(r.data.timestamps[0] == parse_iso8601("2013-01-09T00:00:00"));
  bool mentioned = false;
  for (const std::string& w : r.warnings)
    mentioned = mentioned || w.find("discarded 3 record(s)") != std::string::npos;
  CHECK(mentioned);
}

TEST_CASE("ingest rejects duplicates, bad rows and missing columns") {
  TempFile dup("dup.csv");
  spit(dup.path,
       "timestamp,flow,speed,journey_time\n"
       "2013-01-07T00:00:00,80,90,3\n"
       "2013-01-07T00:00:00,81,89,3\n");
  CHECK_THROWS_WITH_AS(ingest_csv(dup.path), doctest::Contains("2013-01-07T00:00:00"),
                       DataError);

  TempFile bad("bad.csv");
  spit(bad.path,
       "timestamp,flow,speed,journey_time\n"
       "2013-01-07T00:00:00,80,90,3\n"
       "2013-01-07T00:15:00,eighty,90,3\n");
  CHECK_THROWS_WITH_AS(ingest_csv(bad.path), doctest::Contains("line 3"), DataError);

  TempFile missing("missing.csv");
  spit(missing.path, "timestamp,flow,speed\n2013-01-07T00:00:00,80,90\n");
  CHECK_THROWS_WITH_AS(ingest_csv(missing.path), doctest::Contains("journey_time"), DataError);

  TempFile empty("empty.csv");
  spit(empty.path, "timestamp,flow,speed,journey_time\n");
  CHECK_THROWS_AS(ingest_csv(empty.path), DataError);

  CHECK_THROWS_AS(ingest_csv("no_such_file.csv"), DataError);
}

TEST_CASE("windowing layout and boundaries") {
  MultimodalDataset d;
  d.names = {"flow", "speed"};
  d.timestamps = {0, 900, 1800, 2700, 3600};
  d.values = {(Vec(5) << 10, 11, 12, 13, 14).finished(),
              (Vec(5) << 90, 89, 88, 87, 86).finished()};

  WindowedSamples s = window(d, 2);
  CHECK(s.count() == 3);
  CHECK(s.windows[0].rows() == 3);
  CHECK(s.windows[0](0, 0) == 10.0);
  CHECK(s.windows[0](0, 1) == 11.0);
  CHECK(s.targets(0) == 12.0);
  CHECK(s.targets(1) == 13.0);
  CHECK(s.targets(2) == 14.0);
  CHECK(s.target_indices == std::vector<Eigen::Index>{2, 3, 4});
  CHECK(s.target_timestamps[0] == 1800);

  CHECK_THROWS_AS(window(d, 5), DataError);  // L == w
  CHECK_THROWS_AS(window(d, 9), DataError);
}

TEST_CASE("window count matches L - w at the reference scale") {
  MultimodalDataset d;
  d.names = {"flow"};
  const Eigen::Index length = 34876;
  d.timestamps.resize(static_cast<std::size_t>(length));
  for (Eigen::Index i = 0; i < length; ++i) d.timestamps[static_cast<std::size_t>(i)] = 900 * i;
  Vec v(length);
  for (Eigen::Index i = 0; i < length; ++i) v(i) = static_cast<double>(i % 97);
  d.values = {v};
  WindowedSamples s = window(d, 20);
  CHECK(s.count() == 34856);
}

TEST_CASE("every target appears verbatim in the flow series") {
  SynthConfig sc;
  sc.days = 3;
  sc.seed = 300;
  MultimodalDataset d = synth(sc);
  WindowedSamples s = window(d, 12);
  const Vec& flow = d.series("flow");
  for (Eigen::Index k = 0; k < s.count(); ++k)
    CHECK(s.targets(k) == flow(s.target_indices[static_cast<std::size_t>(k)]));
}

TEST_CASE("window is a pure function") {
  SynthConfig sc;
  sc.days = 2;
  sc.seed = 9;
  MultimodalDataset d = synth(sc);
  WindowedSamples a = window(d, 8);
  WindowedSamples b = window(d, 8);
  CHECK((a.targets - b.targets).cwiseAbs().maxCoeff() == 0.0);
  for (std::size_t m = 0; m < a.windows.size(); ++m)
    CHECK((a.windows[m] - b.windows[m]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("noiseless synthetic data is exactly weekly periodic") {
  SynthConfig sc;
  sc.days = 15;
  sc.noise = 0.0;
  MultimodalDataset d = synth(sc);
  const Eigen::Index week = 7 * 96;
  for (const Vec& series : d.values)
    for (Eigen::Index i = 0; i + week < d.count(); ++i)
      CHECK(series(i) == series(i + week));
}

TEST_CASE("synthetic cross-modality coupling has the congestion signs") {
  SynthConfig sc;
  sc.days = 7;
  sc.noise = 0.0;
  MultimodalDataset d = synth(sc);
  CHECK(testing::correlation(d.series("flow"), d.series("speed")) < 0.0);
  CHECK(testing::correlation(d.series("speed"), d.series("journey_time")) < 0.0);
}

TEST_CASE("synth is seed deterministic and validates its config") {
  SynthConfig sc;
  sc.days = 2;
  sc.seed = 77;
  sc.noise = 1.5;
  MultimodalDataset a = synth(sc);
  MultimodalDataset b = synth(sc);
  for (std::size_t m = 0; m < a.values.size(); ++m)
    CHECK((a.values[m] - b.values[m]).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.count() == 192);

  sc.days = 1;
  CHECK_THROWS_AS(synth(sc), DataError);
  sc.days = 2;
  sc.interval_minutes = 7;  // does not divide a day
  CHECK_THROWS_AS(synth(sc), DataError);
}

TEST_CASE("weekday peaks exceed weekend peaks") {
  SynthConfig sc;
  sc.days = 14;
  sc.noise = 0.0;
  MultimodalDataset d = synth(sc);
  const Vec& flow = d.series("flow");
  // day 0 is a Monday; day 5 is Saturday
  const Eigen::Index am_mon = 8 * 4;            // 08:00 Monday
  const Eigen::Index am_sat = 5 * 96 + 8 * 4;   // 08:00 Saturday
  CHECK(flow(am_mon) > flow(am_sat));
}

TEST_CASE("ingest-export-ingest is a fixed point") {
  SynthConfig sc;
  sc.days = 2;
  sc.seed = 123;
  sc.noise = 1.0;
  MultimodalDataset d = synth(sc);

  TempFile f1("fixed1.csv");
  TempFile f2("fixed2.csv");
  export_csv(d, f1.path);
  IngestResult first = ingest_csv(f1.path);
  export_csv(first.data, f2.path);
  IngestResult second = ingest_csv(f2.path);

  CHECK(slurp(f1.path) == slurp(f2.path));
  CHECK(first.data.timestamps == second.data.timestamps);
  for (std::size_t m = 0; m < first.data.values.size(); ++m)
    CHECK((first.data.values[m] - second.data.values[m]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("dataset range filtering") {
  SynthConfig sc;
  sc.days = 2;
  sc.seed = 5;
  MultimodalDataset d = synth(sc);
  const std::int64_t start = d.timestamps[10];
  const std::int64_t end = d.timestamps[20];
  MultimodalDataset cut = d.between(start, end);
  CHECK(cut.count() == 11);
  CHECK(cut.timestamps.front() == start);
  CHECK(cut.timestamps.back() == end);
}
