package io.demo.codec;

class FrameDecoder {
    public byte read(byte[] buf, int i) {
        log.debug("read at " + i);
        return buf[i];
    }
}
