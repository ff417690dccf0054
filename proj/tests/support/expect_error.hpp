#pragma once

#include <gtest/gtest.h>

#include "tir/error.hpp"

#define EXPECT_TIR_ERROR(statement, expected_code)                                            \
  do {                                                                                        \
    try {                                                                                     \
      statement;                                                                              \
      ADD_FAILURE() << "expected " << ::tir::to_string(expected_code) << ", nothing thrown";  \
    } catch (const ::tir::Error& e_) {                                                        \
      EXPECT_EQ(::tir::to_string(e_.code()), ::tir::to_string(expected_code)) << e_.what();   \
    }                                                                                         \
  } while (false)
