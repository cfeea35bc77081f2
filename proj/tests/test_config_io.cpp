#include "hdsa/config.hpp"
#include "hdsa/io.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

using namespace hdsa;

namespace {

const char* kValid = R"(
[benchmark]
name = diffusion_reaction
elements = 40
kappa = 0.2

[prior]
alpha_u = 4
beta_u = 2e-2
alpha_z = 1e-10
beta_z = 3e-2
alpha_d = 1e-4

[update]
ranks = 11, 4, 4
samples = 0
)";

RunConfig parse(const std::string& text) {
  std::istringstream is(text);
  return parse_config(is);
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::string replace(std::string text, const std::string& from, const std::string& to) {
  text.replace(text.find(from), from.size(), to);
  return text;
}

}  // namespace

TEST(Config, ParsesValidFile) {
  const RunConfig c = parse(kValid);
  EXPECT_EQ(c.benchmark, "diffusion_reaction");
  EXPECT_EQ(c.diffusion_reaction.elements, 40);
  EXPECT_DOUBLE_EQ(c.alpha_z, 1e-10);
  EXPECT_DOUBLE_EQ(c.beta_z, 3e-2);
  EXPECT_EQ(c.ranks, (std::vector<Index>{4, 11}));
  EXPECT_EQ(c.samples, 0);
  EXPECT_EQ(c.training_count, 2);
  EXPECT_EQ(c.max_rank(), 11);
}

TEST(Config, MissingKeyIsNamed) {
  EXPECT_NE(error_of(replace(kValid, "alpha_d = 1e-4\n", "")).find("prior.alpha_d"), std::string::npos);
  EXPECT_NE(error_of(replace(kValid, "ranks = 11, 4, 4\n", "")).find("update.ranks"), std::string::npos);
}

TEST(Config, UnknownKeyIsNamed) {
  EXPECT_NE(error_of(replace(kValid, "kappa = 0.2", "kapa = 0.2")).find("benchmark.kapa"), std::string::npos);
  EXPECT_NE(error_of(std::string(kValid) + "[extra]\nfoo = 1\n").find("extra.foo"), std::string::npos);
}

TEST(Config, ValidatesValues) {
  EXPECT_NE(error_of(replace(kValid, "alpha_u = 4", "alpha_u = -4")).find("alpha_u"), std::string::npos);
  EXPECT_NE(error_of(replace(kValid, "alpha_u = 4", "alpha_u = 4x")).find("not a number"), std::string::npos);
  EXPECT_NE(error_of(replace(kValid, "elements = 40", "elements = 4.5")).find("integer"), std::string::npos);
  EXPECT_NE(error_of(replace(kValid, "diffusion_reaction", "heat")).find("heat"), std::string::npos);
  EXPECT_NE(error_of(replace(kValid, "ranks = 11, 4, 4", "ranks = 0, 4")).find("positive"), std::string::npos);
}

TEST(Config, ParametricControlTakesNoCorrelationLength) {
  std::string text = replace(kValid, "name = diffusion_reaction\nelements = 40\nkappa = 0.2",
                             "name = advection_diffusion\ncells = 20");
  EXPECT_NE(error_of(text).find("beta_z"), std::string::npos);
  const RunConfig c = parse(replace(text, "beta_z = 3e-2\n", ""));
  EXPECT_TRUE(c.parametric());
  EXPECT_EQ(c.advection_diffusion.cells, 20);
}

TEST(Config, RankLists) {
  EXPECT_EQ(parse_rank_list("1, 2, 5-8"), (std::vector<Index>{1, 2, 5, 6, 7, 8}));
  EXPECT_EQ(parse_rank_list("3,3,1-2,2"), (std::vector<Index>{1, 2, 3}));
  EXPECT_EQ(parse_rank_list("0-2"), (std::vector<Index>{0, 1, 2}));
  EXPECT_THROW(parse_rank_list("5-3"), ConfigError);
  EXPECT_THROW(parse_rank_list("two"), ConfigError);
  EXPECT_THROW(parse_rank_list("-1"), ConfigError);
}

TEST(Csv, RoundTripPreservesEveryBit) {
  const auto path = std::filesystem::path(::testing::TempDir()) / "hdsa_io" / "table.csv";
  Matrix values(3, 2);
  values << 1.0 / 3.0, -2e-300, 1e300, 0.1, std::nextafter(1.0, 2.0), -0.0;
  write_csv(path, {"a", "b"}, values);
  std::vector<std::string> header;
  const Matrix back = read_csv(path, &header);
  EXPECT_EQ(header, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ((back - values).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(format_number(0.1), "0.10000000000000001");
}

TEST(Csv, FieldTableJoinsCoordinatesAndValues) {
  const auto path = std::filesystem::path(::testing::TempDir()) / "hdsa_io" / "field.csv";
  write_field_csv(path, {"x"}, Matrix::Constant(2, 1, 0.5), {"u", "v"}, Matrix::Ones(2, 2));
  std::vector<std::string> header;
  const Matrix back = read_csv(path, &header);
  EXPECT_EQ(header, (std::vector<std::string>{"x", "u", "v"}));
  EXPECT_EQ(back.cols(), 3);
  EXPECT_EQ(back(1, 0), 0.5);
}

TEST(Hash, Fnv1aReferenceValues) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
}
