#include <cstdlib>
#include <filesystem>
#include <map>
#include <sstream>

#include <gtest/gtest.h>

#include "editer/cli.hpp"
#include "test_util.hpp"

using namespace editer;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args)
{
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path temp_dir()
{
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  auto dir = fs::temp_directory_path() / ("editer_cli_" + std::string(info->name()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

using CsvRow = std::map<std::string, std::string>;

std::vector<std::string> split_csv_line(const std::string& line)
{
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  return fields;
}

std::vector<CsvRow> parse_csv(const std::string& text)
{
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (!line.empty())
      lines.push_back(line);
  }
  std::vector<CsvRow> rows;
  if (lines.empty())
    return rows;
  const auto header = split_csv_line(lines.front());
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split_csv_line(lines[i]);
    CsvRow row;
    for (std::size_t k = 0; k < header.size() && k < f.size(); ++k)
      row[header[k]] = f[k];
    rows.push_back(row);
  }
  return rows;
}

std::string read_text(const fs::path& p)
{
  const auto b = read_bytes(p);
  return std::string(b.begin(), b.end());
}

class EnvGuard {
public:
  explicit EnvGuard(const char* value)
  {
    if (const char* old = std::getenv("EDITER_WORKERS"))
      old_ = old;
    if (value)
      ::setenv("EDITER_WORKERS", value, 1);
    else
      ::unsetenv("EDITER_WORKERS");
  }
  ~EnvGuard()
  {
    if (old_)
      ::setenv("EDITER_WORKERS", old_->c_str(), 1);
    else
      ::unsetenv("EDITER_WORKERS");
  }

private:
  std::optional<std::string> old_;
};

} // namespace

TEST(Cli, SimulateCorrectEvaluatePipeline)
{
  const auto dir = temp_dir();
  const auto raw = (dir / "fg.eds").string();
  const auto fixed = (dir / "fg_corrected.eds").string();
  const auto report = (dir / "report.csv").string();
  ASSERT_EQ(cli({"simulate", "--scenario", std::string(EDITER_SOURCE_DIR) + "/scenarios/fg.json", "--out", raw}).code, 0);
  const auto c = cli({"correct", "--in", raw, "--out", fixed, "--dkx", "7"});
  ASSERT_EQ(c.code, 0) << c.err;
  EXPECT_NE(c.out.find("N_G=1"), std::string::npos);
  EXPECT_TRUE(fs::exists(fixed + ".json"));
  const auto e = cli({"evaluate", "--uncorrected", raw, "--corrected", fixed, "--roi", "0:31,0:31", "--report", report,
                      "--diagnostics", fixed + ".json"});
  ASSERT_EQ(e.code, 0) << e.err;
  const auto rows = parse_csv(read_text(report));
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_GT(std::stod(rows[0].at("emi_removed_percent")), 99.0);
  EXPECT_EQ(rows[0].at("n_groups"), "1");
  EXPECT_EQ(rows[0].at("group_sizes"), "101");
  EXPECT_EQ(rows[0].at("dkx"), "7");
  EXPECT_EQ(rows[0].at("scenario"), "fg");
  EXPECT_LT(std::stod(rows[0].at("nrmse_corrected")), std::stod(rows[0].at("nrmse_uncorrected")));
  EXPECT_NE(e.out.find("EMI removed:"), std::string::npos);
}

TEST(Cli, ReportHeaderListsEveryColumn)
{
  const auto dir = temp_dir();
  const auto raw = (dir / "a.eds").string();
  ASSERT_EQ(cli({"simulate", "--preset", "fg", "--out", raw}).code, 0);
  ASSERT_EQ(cli({"correct", "--in", raw, "--out", (dir / "b.eds").string()}).code, 0);
  const auto e = cli({"evaluate", "--uncorrected", raw, "--corrected", (dir / "b.eds").string(), "--roi", "0:31,0:31"});
  ASSERT_EQ(e.code, 0);
  const auto first = e.out.substr(0, e.out.find("\r\n"));
  std::string expect;
  for (const auto& col : metrics_columns())
    expect += (expect.empty() ? "" : ",") + col;
  EXPECT_EQ(first, expect);
}

TEST(Cli, RepeatRunsGiveIdenticalOutput)
{
  const auto dir = temp_dir();
  const auto raw = (dir / "a.eds").string();
  ASSERT_EQ(cli({"simulate", "--preset", "sm", "--out", raw}).code, 0);
  ASSERT_EQ(cli({"correct", "--in", raw, "--out", (dir / "b.eds").string()}).code, 0);
  ASSERT_EQ(cli({"correct", "--in", raw, "--out", (dir / "c.eds").string()}).code, 0);
  EXPECT_EQ(read_bytes(dir / "b.eds"), read_bytes(dir / "c.eds"));
  const auto e1 = cli({"evaluate", "--uncorrected", raw, "--corrected", (dir / "b.eds").string(), "--roi", "0:31,0:31"});
  const auto e2 = cli({"evaluate", "--uncorrected", raw, "--corrected", (dir / "c.eds").string(), "--roi", "0:31,0:31"});
  EXPECT_EQ(e1.out, e2.out);
}

TEST(Cli, ZeroDetectorFileIsRejected)
{
  const auto dir = temp_dir();
  // header claims no detectors; the payload is just the primary channel
  std::vector<unsigned char> bytes(64, 0);
  std::memcpy(bytes.data(), "EDITERDS", 8);
  bytes[8] = 1;
  bytes[12] = 4;
  bytes[16] = 3;
  bytes[20] = 1;
  bytes.resize(64 + 4 * 3 * 16, 0);
  write_bytes(dir / "nodet.eds", bytes);
  const auto r = cli({"correct", "--in", (dir / "nodet.eds").string(), "--out", (dir / "x.eds").string()});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("no detector channels"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir / "x.eds"));
}

TEST(Cli, ExitCodes)
{
  const auto dir = temp_dir();
  EXPECT_EQ(cli({}).code, 2);
  EXPECT_EQ(cli({"frobnicate"}).code, 2);
  EXPECT_EQ(cli({"correct", "--out", "x"}).code, 2);
  EXPECT_EQ(cli({"--help"}).code, 0);
  EXPECT_EQ(cli({"correct", "--help"}).code, 0);

  const auto missing = cli({"correct", "--in", (dir / "missing.eds").string(), "--out", (dir / "o.eds").string()});
  EXPECT_EQ(missing.code, 3);
  EXPECT_EQ(missing.err.rfind("error: io: ", 0), 0u) << missing.err;

  const auto raw = (dir / "a.eds").string();
  ASSERT_EQ(cli({"simulate", "--preset", "fg", "--out", raw}).code, 0);
  EXPECT_EQ(cli({"correct", "--in", raw, "--out", (dir / "o.eds").string(), "--dkx", "4"}).code, 2);
  EXPECT_EQ(cli({"correct", "--in", raw, "--out", (dir / "o.eds").string(), "--threshold", "1.5"}).code, 2);
  EXPECT_EQ(cli({"correct", "--in", raw, "--out", (dir / "o.eds").string(), "--method", "magic"}).code, 2);
  EXPECT_EQ(cli({"evaluate", "--uncorrected", raw, "--corrected", raw, "--roi", "0:31"}).code, 2);
  EXPECT_EQ(cli({"evaluate", "--uncorrected", raw, "--corrected", raw, "--roi", "0:600,0:3"}).code, 2);
  EXPECT_EQ(cli({"simulate", "--preset", "nope", "--out", raw}).code, 2);
  EXPECT_EQ(cli({"simulate", "--scenario", (dir / "missing.json").string(), "--out", raw}).code, 3);
  write_bytes(dir / "bad.json", std::string_view("{\"id\": 3"));
  EXPECT_EQ(cli({"simulate", "--scenario", (dir / "bad.json").string(), "--out", raw}).code, 3);
}

TEST(Cli, WorkerVariable)
{
  {
    EnvGuard g(nullptr);
    EXPECT_GE(worker_count(), 1);
  }
  {
    EnvGuard g("3");
    EXPECT_EQ(worker_count(), 3);
  }
  for (const char* bad : {"0", "-2", "lots", "2x"}) {
    EnvGuard g(bad);
    EXPECT_THROW(worker_count(), Error) << bad;
  }
  const auto dir = temp_dir();
  const auto raw = (dir / "a.eds").string();
  ASSERT_EQ(cli({"simulate", "--preset", "fg", "--out", raw}).code, 0);
  EnvGuard g("zero");
  EXPECT_EQ(cli({"correct", "--in", raw, "--out", (dir / "o.eds").string()}).code, 2);
}

TEST(Cli, VolumeOutputIndependentOfWorkers)
{
  const auto dir = temp_dir();
  const auto raw = (dir / "v.eds").string();
  ASSERT_EQ(cli({"simulate", "--preset", "volume", "--partitions", "5", "--out", raw}).code, 0);
  {
    EnvGuard g("1");
    ASSERT_EQ(cli({"correct", "--in", raw, "--out", (dir / "one.eds").string()}).code, 0);
  }
  {
    EnvGuard g("4");
    ASSERT_EQ(cli({"correct", "--in", raw, "--out", (dir / "four.eds").string()}).code, 0);
  }
  EXPECT_EQ(read_bytes(dir / "one.eds"), read_bytes(dir / "four.eds"));
  const auto e = cli({"evaluate", "--uncorrected", raw, "--corrected", (dir / "one.eds").string(), "--roi", "0:15,0:15",
                      "--report", (dir / "r.csv").string()});
  ASSERT_EQ(e.code, 0) << e.err;
  EXPECT_EQ(parse_csv(read_text(dir / "r.csv")).size(), 5u);
  EXPECT_NE(e.out.find("over 5 partition(s)"), std::string::npos);
}

TEST(Cli, SweepWritesOneRowPerSetting)
{
  const auto dir = temp_dir();
  const auto r = cli({"sweep", "--preset", "fg", "--dkx", "1,3,5", "--report", (dir / "s.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = parse_csv(read_text(dir / "s.csv"));
  ASSERT_EQ(rows.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(rows[i].at("dkx"), std::to_string(1 + 2 * i));
    EXPECT_GT(std::stod(rows[i].at("wall_seconds")), 0.0);
    EXPECT_FALSE(rows[i].at("emi_removed_percent").empty());
  }
  EXPECT_EQ(cli({"sweep", "--preset", "fg", "--in", "x.eds"}).code, 2);
}

TEST(Cli, InspectDatasetAndSidecar)
{
  const auto dir = temp_dir();
  const auto raw = (dir / "a.eds").string();
  ASSERT_EQ(cli({"simulate", "--preset", "switching", "--out", raw}).code, 0);
  const auto h = cli({"inspect", "--in", raw});
  ASSERT_EQ(h.code, 0);
  EXPECT_NE(h.out.find("readout_samples: 512"), std::string::npos);
  EXPECT_NE(h.out.find("detectors: 5"), std::string::npos);
  EXPECT_NE(h.out.find("ground_truth: yes"), std::string::npos);
  ASSERT_EQ(cli({"correct", "--in", raw, "--out", (dir / "b.eds").string(), "--correlation", (dir / "c").string()}).code, 0);
  const auto d = cli({"inspect", "--diagnostics", (dir / "b.eds.json").string()});
  ASSERT_EQ(d.code, 0);
  EXPECT_NE(d.out.find("N_G=3"), std::string::npos);
  EXPECT_EQ(parse_csv("h\r\n" + read_text(dir / "c_p0.csv")).size(), 101u);
  EXPECT_EQ(cli({"inspect"}).code, 2);
}

TEST(Cli, ConfigFileWithFlagOverride)
{
  const auto dir = temp_dir();
  const auto raw = (dir / "a.eds").string();
  ASSERT_EQ(cli({"simulate", "--preset", "switching", "--out", raw}).code, 0);
  write_bytes(dir / "cfg.json", std::string_view(R"({"dkx": 5, "max_groups": 1})"));
  ASSERT_EQ(cli({"correct", "--in", raw, "--out", (dir / "b.eds").string(), "--config", (dir / "cfg.json").string(),
                 "--dkx", "3"})
                .code,
            0);
  const auto side = parse_json_file(dir / "b.eds.json");
  EXPECT_EQ(side["config"]["dkx"], 3);
  EXPECT_EQ(side["config"]["max_groups"], 1);
  EXPECT_EQ(side["partitions"][0]["n_groups"], 1);
}

TEST(Cli, WritesImages)
{
  const auto dir = temp_dir();
  const auto raw = (dir / "a.eds").string();
  ASSERT_EQ(cli({"simulate", "--preset", "fg", "--out", raw}).code, 0);
  ASSERT_EQ(cli({"evaluate", "--uncorrected", raw, "--corrected", raw, "--roi", "0:31,0:31", "--images",
                 (dir / "img").string()})
                .code,
            0);
  const auto pgm = read_text(dir / "img_corrected_p0.pgm");
  EXPECT_EQ(pgm.substr(0, 13), "P5\n101 512\n25");
  EXPECT_EQ(pgm.size(), 15u + 101u * 512u);
}
