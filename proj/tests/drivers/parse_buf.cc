#include <cstddef>
#include <cstdint>

extern "C" int64_t parse_buf(void *arg1, int64_t arg2);

extern "C" int LLVMFuzzerTestOneInput(const uint8_t *data, size_t size)
{
    parse_buf(const_cast<uint8_t *>(data), static_cast<int64_t>(size));
    return 0;
}
