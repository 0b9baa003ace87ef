#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cli.hpp"

namespace esrm::cli {
namespace {

struct Invocation {
  int status;
  std::string out;
  std::string err;
};

Invocation invoke(std::initializer_list<const char*> args) {
  std::vector<const char*> argv{"esrm"};
  argv.insert(argv.end(), args.begin(), args.end());
  std::ostringstream out;
  std::ostringstream err;
  const int status = run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {status, out.str(), err.str()};
}

std::vector<std::vector<std::string>> read_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    std::vector<std::string> cells;
    std::istringstream fields(line);
    std::string cell;
    while (std::getline(fields, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

std::size_t column(const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  ADD_FAILURE() << "missing column " << name;
  return 0;
}

TEST(Cli, ComputeExponential) {
  const auto r = invoke({"compute", "--dist", "normal:0,1", "--spectrum", "exp:5", "--rule",
                         "simpson", "--n", "10001"});
  ASSERT_EQ(r.status, kExitOk) << r.err;
  const auto rows = read_csv(r.out);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"a", "srm_value", "rule", "n", "mu", "sigma",
                                               "endpoint", "elapsed_seconds"}));
  EXPECT_NEAR(std::stod(rows[1][1]), 1.0816, 0.01);
  EXPECT_EQ(rows[1][2], "simpson");
  EXPECT_EQ(rows[1][3], "10001");
  EXPECT_EQ(rows[1][6], "truncate");
}

TEST(Cli, ComputeSweepIsMonotone) {
  const auto r = invoke({"compute", "--spectrum", "exp:5", "--sweep-a", "1:100:99", "--n", "10001"});
  ASSERT_EQ(r.status, kExitOk) << r.err;
  const auto rows = read_csv(r.out);
  ASSERT_EQ(rows.size(), 100u);
  for (std::size_t i = 2; i < rows.size(); ++i) {
    EXPECT_GT(std::stod(rows[i][0]), std::stod(rows[i - 1][0]));
    EXPECT_GT(std::stod(rows[i][1]), std::stod(rows[i - 1][1]));
  }
}

TEST(Cli, ComputeEsClosedForm) {
  const auto r = invoke({"compute", "--spectrum", "es:0.95", "--mode", "closed-form"});
  ASSERT_EQ(r.status, kExitOk) << r.err;
  const auto rows = read_csv(r.out);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_NEAR(std::stod(rows[1][column(rows[0], "es_value")]), 2.0627, 5e-5);
  EXPECT_NEAR(std::stod(rows[1][column(rows[0], "var_value")]), 1.6448536, 1e-7);
  EXPECT_EQ(rows[1][column(rows[0], "mode")], "closed_form");
}

TEST(Cli, ComputeEsQuadrature) {
  const auto r = invoke({"compute", "--spectrum", "es:0.95", "--n", "100001"});
  ASSERT_EQ(r.status, kExitOk) << r.err;
  const auto rows = read_csv(r.out);
  EXPECT_NEAR(std::stod(rows[1][column(rows[0], "es_value")]), 2.0627128, 1e-3);
}

TEST(Cli, ConvergeReportsPercentageError) {
  const auto r = invoke({"converge", "--rules", "simpson", "--n-list", "1001,10001", "--spectrum",
                         "exp:5"});
  ASSERT_EQ(r.status, kExitOk) << r.err;
  const auto rows = read_csv(r.out);
  ASSERT_EQ(rows.size(), 3u);
  const auto pct = column(rows[0], "pct_error");
  const auto est = column(rows[0], "estimate");
  const auto ref = column(rows[0], "reference");
  const double e1 = std::stod(rows[1][pct]);
  const double e2 = std::stod(rows[2][pct]);
  EXPECT_LT(e1, 0.0);
  EXPECT_LT(e2, 0.0);
  EXPECT_GT(e1, -1.55 * 2.5);
  EXPECT_LT(e1, -1.55 / 2.5);
  EXPECT_GT(e2, -0.18 * 2.5);
  EXPECT_LT(e2, -0.18 / 2.5);
  for (std::size_t i = 1; i < 3; ++i) {
    const double estimate = std::stod(rows[i][est]);
    const double reference = std::stod(rows[i][ref]);
    EXPECT_NEAR(std::stod(rows[i][pct]), 100.0 * (estimate - reference) / reference, 1e-12);
  }
}

TEST(Cli, ConvergeAllRulesOverRange) {
  const auto r = invoke({"converge", "--n-list", "101..20001"});
  ASSERT_EQ(r.status, kExitOk) << r.err;
  const auto rows = read_csv(r.out);
  ASSERT_GT(rows.size(), 4u * 10u);
  const auto rule = column(rows[0], "rule");
  const auto pct = column(rows[0], "pct_error");
  const auto n = column(rows[0], "n");
  for (const char* name : {"trapezoid", "simpson", "niederreiter", "weyl"}) {
    double last_error = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i][rule] != name) continue;
      ++count;
      last_error = std::stod(rows[i][pct]);
      EXPECT_EQ(std::stoul(rows[i][n]) % 2, 1u);
    }
    EXPECT_GT(count, 10u) << name;
    EXPECT_LT(std::fabs(last_error), 0.5) << name;
  }
}

TEST(Cli, CiExampleAndDeterminism) {
  const auto r = invoke({"ci", "--spectrum", "exp:5", "--n", "10001", "--b", "1000",
                         "--confidence", "0.90", "--seed", "42"});
  ASSERT_EQ(r.status, kExitOk) << r.err;
  const auto rows = read_csv(r.out);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_NEAR(std::stod(rows[1][column(rows[0], "lower")]), 1.0591, 0.015);
  EXPECT_NEAR(std::stod(rows[1][column(rows[0], "upper")]), 1.1012, 0.015);
  EXPECT_EQ(rows[1][column(rows[0], "seed")], "42");
  EXPECT_NE(r.err.find("elapsed_seconds="), std::string::npos);

  const auto again = invoke({"ci", "--spectrum", "exp:5", "--n", "10001", "--b", "1000",
                             "--confidence", "0.90", "--seed", "42", "--workers", "4"});
  EXPECT_EQ(again.out, r.out);
}

TEST(Cli, CiRejectsSingleTrial) {
  const auto r = invoke({"ci", "--b", "1"});
  EXPECT_EQ(r.status, kExitUsage);
  EXPECT_TRUE(r.out.empty());
  EXPECT_NE(r.err.find("usage error"), std::string::npos);
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
}

TEST(Cli, Validate) {
  const auto exp5 = invoke({"validate", "--spectrum", "exp:5"});
  EXPECT_EQ(exp5.status, kExitOk) << exp5.err;
  const auto rows = read_csv(exp5.out);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"spectrum", "grid_size", "tolerance",
                                               "positivity_ok", "normalisation_value",
                                               "normalisation_ok", "increasing_ok"}));
  EXPECT_EQ(rows[1][3], "true");
  EXPECT_EQ(rows[1][5], "true");
  EXPECT_EQ(rows[1][6], "true");

  EXPECT_EQ(invoke({"validate", "--spectrum", "es:0.95"}).status, kExitOk);
  EXPECT_EQ(invoke({"validate", "--spectrum", "exp:0"}).status, kExitUsage);
  EXPECT_EQ(invoke({"validate", "--spectrum", "es:0.95", "--tolerance", "1e-9"}).status,
            kExitCheckFailed);
}

TEST(Cli, WeightsCurve) {
  const auto r = invoke({"weights", "--spectrum", "exp:25", "--n", "11"});
  ASSERT_EQ(r.status, kExitOk) << r.err;
  const auto rows = read_csv(r.out);
  ASSERT_EQ(rows.size(), 12u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"p", "weight", "spectrum"}));
  EXPECT_EQ(std::stod(rows[11][0]), 1.0);
  EXPECT_NEAR(std::stod(rows[11][1]), 25.0, 1e-9);
}

TEST(Cli, UsageErrors) {
  for (auto args : {std::initializer_list<const char*>{"compute", "--rule", "midpoint"},
                    {"compute", "--n", "10000"},
                    {"compute", "--dist", "normal:0,-1"},
                    {"compute", "--dist", "lognormal:0,1"},
                    {"compute", "--spectrum", "pow:2"},
                    {"compute", "--format", "xml"},
                    {"compute", "--spectrum", "exp:5", "--mode", "closed-form"},
                    {"converge", "--n-list", "1001,abc"},
                    {"ci", "--confidence", "1.5"},
                    {"bogus"},
                    {}}) {
    const auto r = invoke(args);
    EXPECT_EQ(r.status, kExitUsage) << r.out;
    EXPECT_FALSE(r.err.empty());
  }
  EXPECT_EQ(invoke({"--help"}).status, kExitOk);
}

TEST(Cli, CsvAndJsonAgreeExactly) {
  const auto csv = invoke({"converge", "--rules", "simpson,weyl", "--n-list", "1001,2001"});
  const auto json = invoke({"converge", "--rules", "simpson,weyl", "--n-list", "1001,2001",
                            "--format", "json"});
  ASSERT_EQ(csv.status, kExitOk);
  ASSERT_EQ(json.status, kExitOk);
  const auto rows = read_csv(csv.out);
  const auto doc = nlohmann::ordered_json::parse(json.out);
  ASSERT_EQ(doc.size(), rows.size() - 1);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& obj = doc[i - 1];
    ASSERT_EQ(obj.size(), rows[0].size());
    for (std::size_t c = 0; c < rows[0].size(); ++c) {
      const auto& value = obj.at(rows[0][c]);
      const std::string& text = rows[i][c];
      if (rows[0][c] == "elapsed_seconds") continue;  // measured separately per run
      if (value.is_string()) {
        EXPECT_EQ(value.get<std::string>(), text);
      } else if (value.is_number_unsigned()) {
        EXPECT_EQ(value.get<std::uint64_t>(), std::stoull(text));
      } else {
        EXPECT_EQ(value.get<double>(), std::strtod(text.c_str(), nullptr)) << rows[0][c];
      }
    }
  }
}

TEST(Cli, CsvNumbersRoundTripBitExactly) {
  Table table{{"x"}, {}};
  for (double x : {0.1, 1.0 / 3.0, 2.5055789993982, 1e-300, -7.25e17}) table.rows.push_back({x});
  std::ostringstream os;
  write_csv(os, table);
  const auto rows = read_csv(os.str());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    EXPECT_EQ(std::strtod(rows[i + 1][0].c_str(), nullptr), std::get<double>(table.rows[i][0]));
  }
  EXPECT_EQ(csv_cell(std::string("a,b")), "\"a,b\"");
  EXPECT_EQ(csv_cell(std::string("say \"hi\"")), "\"say \"\"hi\"\"\"");
}

TEST(Cli, WritesToOutFile) {
  const auto path = std::filesystem::temp_directory_path() / "esrm_cli_test_out.csv";
  std::filesystem::remove(path);
  const std::string p = path.string();
  const auto r = invoke({"validate", "--spectrum", "exp:5", "--out", p.c_str()});
  ASSERT_EQ(r.status, kExitOk);
  EXPECT_TRUE(r.out.empty());
  std::ifstream in(path);
  std::stringstream contents;
  contents << in.rdbuf();
  EXPECT_EQ(contents.str().rfind("spectrum,grid_size,", 0), 0u);
  std::filesystem::remove(path);
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

TEST(Cli, ExecutableOutputIsByteIdenticalAcrossRuns) {
  const auto dir = std::filesystem::temp_directory_path();
  const auto first = dir / "esrm_cli_test_ci_1.csv";
  const auto second = dir / "esrm_cli_test_ci_2.csv";
  const std::string base = std::string(ESRM_TOOL_PATH) +
                           " ci --spectrum exp:5 --n 2001 --b 300 --seed 7 2>/dev/null > ";
  ASSERT_EQ(std::system((base + first.string()).c_str()), 0);
  ASSERT_EQ(std::system((base + second.string()).c_str()), 0);
  const auto a = slurp(first);
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, slurp(second));
  std::filesystem::remove(first);
  std::filesystem::remove(second);
}

TEST(Cli, ExecutableExitStatuses) {
  const std::string tool = ESRM_TOOL_PATH;
  auto status = [&](const std::string& args) {
    const int raw = std::system((tool + " " + args + " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(raw);
  };
  EXPECT_EQ(status("validate --spectrum exp:5"), kExitOk);
  EXPECT_EQ(status("validate --spectrum exp:0"), kExitUsage);
  EXPECT_EQ(status("ci --b 1"), kExitUsage);
  EXPECT_EQ(status("validate --spectrum es:0.95 --tolerance 1e-9"), kExitCheckFailed);
}

}  // namespace
}  // namespace esrm::cli
