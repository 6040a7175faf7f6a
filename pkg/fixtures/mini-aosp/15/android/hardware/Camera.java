package android.hardware;

/**
 * The Camera class is used to set image capture settings.
 */
public class Camera {
    /**
     * Camera service settings.
     */
    public static class Parameters {
        /**
         * Returns the dimension setting for pictures.
         */
        public Size getPictureSize() {
            String pair = get(KEY_PICTURE_SIZE);
            return strToSize(pair);
        }
    }
}
