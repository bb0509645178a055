// SPDX-License-Identifier: Apache-2.0
#include <codeact/task_corpus.hpp>

#include <gtest/gtest.h>

#include <sstream>

using namespace codeact;

namespace
{

std::string data(char const* name)
{
    return std::string(CODEACT_TEST_DATA) + "/" + name;
}

} // namespace

TEST(Corpus, BuiltinFixturesAreValid)
{
    auto const corpus = builtin_fixtures();
    ASSERT_EQ(corpus.tasks.size(), 5u);
    for (auto const& t: corpus.tasks)
        EXPECT_TRUE(task_problems(t).empty()) << t.id;
    auto const* pal = corpus.find("is_palindrome");
    ASSERT_NE(pal, nullptr);
    EXPECT_NE(std::find(pal->tests.begin(), pal->tests.end(), "assert is_palindrome(\"TENET\") == True"), pal->tests.end());
    EXPECT_TRUE(text::is_valid_utf8(pal->instruction));
    EXPECT_NE(pal->instruction.find("\xe0\xa6"), std::string::npos); // Bengali block
}

TEST(Corpus, RoundTripPreservesInstructionBytes)
{
    auto const original = builtin_fixtures();
    std::stringstream buf;
    write_corpus(buf, original);
    auto const reloaded = parse_corpus(buf, original.source_path);
    EXPECT_EQ(reloaded.tasks, original.tasks);
}

TEST(Corpus, DuplicateIdNamesTheLine)
{
    try
    {
        load_corpus(data("dup_ids.jsonl"));
        FAIL() << "expected CorpusError";
    }
    catch (CorpusError const& e)
    {
        EXPECT_EQ(e.kind(), CorpusErrorKind::duplicate_id);
        EXPECT_EQ(e.line(), 3u);
        EXPECT_NE(std::string(e.what()).find("'a'"), std::string::npos);
    }
}

TEST(Corpus, ZeroTestsRejectedWithReason)
{
    try
    {
        load_corpus(data("zero_tests.jsonl"));
        FAIL() << "expected CorpusError";
    }
    catch (CorpusError const& e)
    {
        EXPECT_EQ(e.kind(), CorpusErrorKind::invalid_task);
        EXPECT_EQ(e.line(), 2u);
        EXPECT_NE(std::string(e.what()).find("all of its assertions"), std::string::npos);
    }
}

TEST(Corpus, MalformedJsonAndMissingFile)
{
    try
    {
        load_corpus(data("malformed.jsonl"));
        FAIL();
    }
    catch (CorpusError const& e)
    {
        EXPECT_EQ(e.kind(), CorpusErrorKind::malformed_record);
        EXPECT_EQ(e.line(), 3u);
    }
    try
    {
        load_corpus(data("does_not_exist.jsonl"));
        FAIL();
    }
    catch (CorpusError const& e)
    {
        EXPECT_EQ(e.kind(), CorpusErrorKind::io);
    }
}

TEST(Corpus, EmptyAndInvalidRecords)
{
    std::istringstream empty("\n  \n");
    EXPECT_THROW(parse_corpus(empty, "mem"), CorpusError);

    std::istringstream bad_split(R"j({"id":"x","instruction":"ক","entry_point":"f","tests":["assert f()"],"split":"train"})j");
    EXPECT_THROW(parse_corpus(bad_split, "mem"), CorpusError);

    std::istringstream not_assert(R"j({"id":"x","instruction":"ক","entry_point":"f","tests":["f() == 1"]})j");
    EXPECT_THROW(parse_corpus(not_assert, "mem"), CorpusError);

    std::istringstream bad_utf8("{\"id\":\"x\",\"instruction\":\"\xC3\",\"entry_point\":\"f\",\"tests\":[\"assert f()\"]}");
    EXPECT_THROW(parse_corpus(bad_utf8, "mem"), CorpusError);
}

TEST(Corpus, SplitAndUnknownFields)
{
    std::istringstream in(R"j({"id":"x","instruction":"ক","entry_point":"f","tests":["assert f()"],"split":"blind_test","extra":1})j");
    auto const corpus = parse_corpus(in, "mem");
    ASSERT_EQ(corpus.tasks.size(), 1u);
    EXPECT_EQ(corpus.tasks[0].split, Split::blind_test);
}

TEST(Corpus, ValidateReportsEveryProblem)
{
    std::size_t count = 0;
    auto diags = validate_corpus(data("dup_ids.jsonl"), &count);
    ASSERT_EQ(diags.size(), 1u);
    EXPECT_EQ(diags[0].kind, CorpusErrorKind::duplicate_id);
    EXPECT_EQ(count, 2u);

    diags = validate_corpus(data("zero_tests.jsonl"), &count);
    ASSERT_EQ(diags.size(), 1u);
    EXPECT_EQ(diags[0].line, 2u);
}
