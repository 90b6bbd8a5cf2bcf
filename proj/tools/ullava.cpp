// Copyright 2026 The ullava Authors.
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "ullava/cli.hpp"

int main(int argc, char** argv) { return ullava::cli::run(argc, argv, std::cout, std::cerr); }
