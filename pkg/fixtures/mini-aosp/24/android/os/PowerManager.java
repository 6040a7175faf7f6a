package android.os;

/**
 * This class gives you control of the power state of the device.
 */
public final class PowerManager {
    /**
     * Returns true if the device is in an interactive state.
     */
    public boolean isInteractive() {
        return mService.isInteractive();
    }
}
