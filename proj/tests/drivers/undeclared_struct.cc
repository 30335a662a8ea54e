#include <cstddef>
#include <cstdint>

extern "C" int64_t process_blob(void *arg1);

extern "C" int LLVMFuzzerTestOneInput(const uint8_t *data, size_t size)
{
    struct blob_header header;
    header.length = size;
    process_blob(&header);
    return 0;
}
