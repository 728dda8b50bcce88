#include <catch2/catch_amalgamated.hpp>

#include "linknbed/adam.hpp"

using namespace linknbed;
using Catch::Approx;

TEST_CASE("first step with unit gradient moves by -lr") {
  // m-hat and v-hat both bias-correct to exactly 1 on step one.
  Adam<double> opt({{1, 1}});
  std::vector<double> param{0.0};
  std::vector<double> grad{1.0};
  opt.begin_step(0.01);
  opt.update_row(0, 0, {grad.data(), 1}, {param.data(), 1});
  REQUIRE(param[0] == Approx(-0.01).margin(1e-6));
}

TEST_CASE("zero gradient leaves parameters unchanged") {
  Adam<double> opt({{2, 3}});
  Matrix<double> p(2, 3);
  for (size_t i = 0; i < p.data.size(); ++i) p.data[i] = double(i) + 1;
  Matrix<double> before = p;
  std::vector<double> zero(3, 0.0);
  opt.begin_step(0.1);
  opt.update_row(0, 0, {zero.data(), 3}, p.row(0));
  REQUIRE(p.data == before.data);
}

TEST_CASE("untouched rows keep zero moments and values") {
  Adam<double> opt({{2, 2}});
  Matrix<double> p(2, 2);
  p.at(0, 0) = 5;
  p.at(1, 0) = 7;
  std::vector<double> g{1.0, 1.0};
  opt.begin_step(0.01);
  opt.update_row(0, 0, {g.data(), 2}, p.row(0));
  REQUIRE(p.at(1, 0) == 7.0);
  REQUIRE(opt.first_moment(0).at(1, 0) == 0.0);
  REQUIRE(opt.second_moment(0).at(1, 0) == 0.0);
  REQUIRE(opt.first_moment(0).at(0, 0) != 0.0);
}

TEST_CASE("zero learning rate is a no-op on parameters") {
  Adam<double> opt({{1, 2}});
  Matrix<double> p(1, 2);
  p.at(0, 0) = 1.5;
  p.at(0, 1) = -2.5;
  Matrix<double> before = p;
  std::vector<double> g{0.3, -0.4};
  opt.begin_step(0.0);
  opt.update_row(0, 0, {g.data(), 2}, p.row(0));
  REQUIRE(p.data == before.data);
}

TEST_CASE("step counter advances once per begin_step") {
  Adam<double> opt({{1, 1}});
  REQUIRE(opt.step_count() == 0);
  opt.begin_step(0.01);
  opt.begin_step(0.01);
  REQUIRE(opt.step_count() == 2);
}
